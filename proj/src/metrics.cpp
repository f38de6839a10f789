#include "supsup/metrics.hpp"

#include <charconv>
#include <numeric>

namespace supsup {

void MetricsRecord::finalize() {
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  mean_accuracy = mean(accuracy);
  mean_id_accuracy = mean(id_accuracy);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& out, const MetricsRecord& r) {
  out << kMetricsHeader << "\r\n";
  auto row = [&](std::string_view task, double acc, double id, double sec) {
    out << csv_field(task) << ',' << csv_number(acc) << ',' << csv_number(id) << ',' << r.masks << ','
        << r.bytes << ',' << csv_number(sec) << "\r\n";
  };
  double total = 0.0;
  for (std::size_t t = 0; t < r.accuracy.size(); ++t) {
    const double sec = t < r.seconds.size() ? r.seconds[t] : 0.0;
    total += sec;
    row(std::to_string(t), r.accuracy[t], t < r.id_accuracy.size() ? r.id_accuracy[t] : 0.0, sec);
  }
  row("mean", r.mean_accuracy, r.mean_id_accuracy, total);
}

}  // namespace supsup
