#include "nogap/metrics.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "nogap/errors.hpp"

namespace nogap::metrics {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double parse_double(std::string_view s, std::string_view key) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("report: bad number for '" + std::string(key) + "': '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, std::string_view key) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("report: bad integer for '" + std::string(key) + "': '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

double relative_error(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("relative_error: sizes differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0)) throw DomainError("relative_error: truth has zero norm");
  return 100.0 * std::sqrt(num / den);
}

std::vector<double> per_sample_errors(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape() || pred.rank() < 1) {
    throw ShapeError("per_sample_errors: shapes " + shape_to_string(pred.shape()) + " and " +
                     shape_to_string(truth.shape()));
  }
  const std::size_t t = pred.dim(0), m = pred.size() / std::max<std::size_t>(t, 1);
  std::vector<double> out(t);
  for (std::size_t s = 0; s < t; ++s) {
    out[s] = relative_error(pred.data().subspan(s * m, m), truth.data().subspan(s * m, m));
  }
  return out;
}

double coverage(const gp::Posterior& posterior, const Tensor& truth, double level) {
  if (posterior.mean.shape() != truth.shape() || posterior.std.shape() != truth.shape()) {
    throw ShapeError("coverage: shapes differ");
  }
  if (truth.size() == 0) throw ShapeError("coverage: no points");
  const auto [lo, hi] = gp::ci_band(posterior, level);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (lo[i] <= truth[i] && truth[i] <= hi[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ShapeError("summarize: no values");
  Summary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

EvalReport evaluate(const gp::Posterior& posterior, const Tensor& truth) {
  EvalReport r;
  r.errors = per_sample_errors(posterior.mean, truth);
  r.n_test = r.errors.size();
  const Summary s = summarize(r.errors);
  r.mean_error = s.mean;
  r.std_error = s.std;
  double sd = 0.0;
  for (double v : posterior.std.data()) sd += v;
  r.mean_pred_std = sd / static_cast<double>(posterior.std.size());
  r.coverage95 = coverage(posterior, truth, 0.95);
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "problem=" << problem << "\n"
     << "variant=" << variant << "\n"
     << "seed=" << seed << "\n"
     << "n_train=" << n_train << "\n"
     << "n_test=" << n_test << "\n"
     << "mean_error_pct=" << num(mean_error) << "\n"
     << "std_error_pct=" << num(std_error) << "\n"
     << "mean_pred_std=" << num(mean_pred_std) << "\n"
     << "coverage95=" << num(coverage95) << "\n"
     << "runtime_seconds=" << num(runtime_seconds) << "\n"
     << "errors_pct=";
  for (std::size_t i = 0; i < errors.size(); ++i) os << (i ? "," : "") << num(errors[i]);
  os << "\n";
  return os.str();
}

std::string EvalReport::csv_header() {
  return "problem,variant,seed,n_train,n_test,mean_error_pct,std_error_pct,mean_pred_std,coverage95,runtime_seconds";
}

std::string EvalReport::csv_row() const {
  std::ostringstream os;
  os << problem << "," << variant << "," << seed << "," << n_train << "," << n_test << "," << num(mean_error) << ","
     << num(std_error) << "," << num(mean_pred_std) << "," << num(coverage95) << "," << num(runtime_seconds);
  return os.str();
}

EvalReport parse_report(const std::string& text) {
  EvalReport r;
  std::istringstream is(text);
  std::string line;
  bool have_problem = false, have_variant = false, have_error = false;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("report: expected key=value, got '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string_view val = std::string_view(line).substr(eq + 1);
    if (key == "problem") {
      r.problem = val;
      have_problem = true;
    } else if (key == "variant") {
      r.variant = val;
      have_variant = true;
    } else if (key == "seed") {
      r.seed = parse_uint(val, key);
    } else if (key == "n_train") {
      r.n_train = parse_uint(val, key);
    } else if (key == "n_test") {
      r.n_test = parse_uint(val, key);
    } else if (key == "mean_error_pct") {
      r.mean_error = parse_double(val, key);
      have_error = true;
    } else if (key == "std_error_pct") {
      r.std_error = parse_double(val, key);
    } else if (key == "mean_pred_std") {
      r.mean_pred_std = parse_double(val, key);
    } else if (key == "coverage95") {
      r.coverage95 = parse_double(val, key);
    } else if (key == "runtime_seconds") {
      r.runtime_seconds = parse_double(val, key);
    } else if (key == "errors_pct") {
      r.errors.clear();
      std::size_t pos = 0;
      while (pos < val.size()) {
        std::size_t next = val.find(',', pos);
        if (next == std::string_view::npos) next = val.size();
        r.errors.push_back(parse_double(val.substr(pos, next - pos), key));
        pos = next + 1;
      }
    }
  }
  if (!have_problem || !have_variant || !have_error) throw FormatError("report: missing problem, variant or error");
  return r;
}

}  // namespace nogap::metrics
