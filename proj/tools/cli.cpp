#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "nogap/container.hpp"
#include "nogap/errors.hpp"
#include "nogap/experiment.hpp"

namespace nogap::cli {

namespace fs = std::filesystem;

namespace {

// Bad invocation that is not a numeric problem; exits with 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string out = "run";
  bool force = false;
  std::vector<std::string> set;
  std::string data;
  std::string model;
  std::optional<std::size_t> iterations;
  bool quiet = false;
};

using KeyValues = std::map<std::string, std::string>;

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  KeyValues kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq), val = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    };
    strip(key);
    strip(val);
    kv[key] = val;
  }
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw Error("cannot write " + tmp.string());
    o << text;
    if (!o) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void refuse_existing(const std::vector<fs::path>& paths, bool force) {
  if (force) return;
  for (const auto& p : paths) {
    if (fs::exists(p)) throw UsageError(p.string() + " already exists (use --force to overwrite)");
  }
}

// Config from --config, else the echo left by generate, else the default
// preset; then --set, --seed and --variant overrides.
exp::ExperimentConfig resolve_config(const Options& o, const fs::path& run_dir) {
  std::string text;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot open config " + o.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else if (fs::exists(run_dir / "config.toml")) {
    std::ifstream in(run_dir / "config.toml");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  for (const auto& s : o.set) {
    if (s.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    text += "\n" + s;
  }
  if (o.seed) text += "\nseed = " + std::to_string(*o.seed);
  if (!o.variant.empty()) text += "\nvariant = " + o.variant;
  if (o.iterations) text += "\niterations = " + std::to_string(*o.iterations);
  return exp::parse_config(text);
}

std::string param_box(datagen::Problem p) {
  switch (p) {
    case datagen::Problem::Advection:
      return "c in [0.3, 0.7], w in [0.3, 0.6], h in [1, 2]";
    case datagen::Problem::Poisson:
      return "alpha in [-2, 2], beta in [-2, 2]";
    case datagen::Problem::Burgers:
      return "u0 ~ GRF 625 (-Laplacian + 25)^-2";
  }
  return "";
}

int cmd_generate(const Options& o, std::ostream& out) {
  const fs::path dir = o.out;
  const auto cfg = resolve_config(o, fs::path{});
  const fs::path train = dir / "train.ngpd", test = dir / "test.ngpd", manifest = dir / "manifest.txt";
  refuse_existing({train, test, manifest}, o.force);
  fs::create_directories(dir);
  const auto pair = exp::generate_datasets(cfg);
  data::dataset_write(pair.train, train);
  data::dataset_write(pair.test, test);
  const std::string config_text = exp::to_text(cfg);
  write_text(dir / "config.toml", config_text);
  std::ostringstream m;
  m << "problem = " << datagen::to_string(cfg.problem) << "\n"
    << "seed = " << cfg.seed << "\n"
    << "train_file = train.ngpd\n"
    << "train_hash = " << io::file_content_hash(train) << "\n"
    << "train_samples = " << cfg.n_train << "\n"
    << "train_stream = 0\n"
    << "test_file = test.ngpd\n"
    << "test_hash = " << io::file_content_hash(test) << "\n"
    << "test_samples = " << cfg.n_test << "\n"
    << "test_stream = 1\n"
    << "parameter_box = " << param_box(cfg.problem) << "\n"
    << "config_hash = " << io::content_hash(std::span(reinterpret_cast<const std::uint8_t*>(config_text.data()),
                                                        config_text.size()))
    << "\n";
  write_text(manifest, m.str());
  out << m.str();
  return 0;
}

// Verifies a dataset file against the manifest next to it, when present.
std::string checked_hash(const fs::path& file, const std::string& key) {
  const std::string hash = io::file_content_hash(file);
  const fs::path manifest = file.parent_path() / "manifest.txt";
  if (fs::exists(manifest)) {
    const auto kv = read_key_values(manifest);
    const auto it = kv.find(key);
    if (it != kv.end() && it->second != hash) {
      throw FormatError(file.string() + " does not match its manifest (" + key + ")");
    }
  }
  return hash;
}

void write_log(const fs::path& path, const gp::TrainedModel& model) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,objective,noise_std,lengthscale_x,variance_x";
  const std::size_t nf = model.log.empty() ? 0 : model.log.front().lengthscale_f.size();
  for (std::size_t a = 0; a < nf; ++a) os << ",lengthscale_f" << a;
  os << "\n";
  for (const auto& e : model.log) {
    os << e.iteration << "," << e.objective << "," << e.noise_std << "," << e.lengthscale_x << "," << e.variance_x;
    for (double h : e.lengthscale_f) os << "," << h;
    os << "\n";
  }
  write_text(path, os.str());
}

fs::path variant_dir(const Options& o, const exp::ExperimentConfig& cfg) {
  return fs::path(o.out) / gp::to_string(cfg.variant);
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path run = o.out;
  const auto cfg = resolve_config(o, run);
  const fs::path data_path = o.data.empty() ? run / "train.ngpd" : fs::path(o.data);
  if (!fs::exists(data_path)) throw UsageError("training data " + data_path.string() + " not found");
  const fs::path dir = variant_dir(o, cfg);
  const fs::path model_path = dir / "model.ngpc", log_path = dir / "train_log.csv";
  refuse_existing({model_path, log_path}, o.force);

  const std::string hash = checked_hash(data_path, "train_hash");
  const data::Dataset ds = data::dataset_read(data_path);
  if (ds.problem != datagen::to_string(cfg.problem)) {
    throw UsageError("dataset holds '" + ds.problem + "' but the config says '" + datagen::to_string(cfg.problem) + "'");
  }
  auto tc = cfg.train_config();
  if (!o.quiet) {
    tc.progress = [&err, total = cfg.iterations](const gp::LogEntry& e) {
      if (e.iteration % 100 == 0 || e.iteration == total) {
        err << "iteration " << e.iteration << " objective " << e.objective << " noise_std " << e.noise_std << "\n";
      }
    };
  }
  exp::tune_allocator();
  gp::TrainedModel model = gp::train(ds, tc);
  model.train_hash = hash;
  fs::create_directories(dir);
  gp::write_model(model_path, model);
  write_log(log_path, model);
  write_text(dir / "config.toml", exp::to_text(cfg));
  out << "variant = " << gp::to_string(cfg.variant) << "\n"
      << "initial_objective = " << model.initial_objective << "\n"
      << "best_objective = " << model.best_objective << "\n"
      << "checkpoint = " << model_path.string() << "\n";
  if (model.diverged) {
    err << "training diverged: " << model.diagnostic << "; kept the last finite iterate in " << model_path.string()
        << "\n";
    return 1;
  }
  return 0;
}

struct Loaded {
  gp::TrainedModel model;
  data::Dataset data;
  fs::path dir;
};

Loaded load_model_and_data(const Options& o, const char* default_data) {
  const fs::path run = o.out;
  std::string variant = o.variant.empty() ? "nogap" : o.variant;
  gp::parse_variant(variant);
  const fs::path model_path = o.model.empty() ? run / variant / "model.ngpc" : fs::path(o.model);
  const fs::path data_path = o.data.empty() ? run / default_data : fs::path(o.data);
  if (!fs::exists(model_path)) throw UsageError("model " + model_path.string() + " not found");
  if (!fs::exists(data_path)) throw UsageError("data " + data_path.string() + " not found");
  Loaded l{gp::read_model(model_path), {}, model_path.parent_path()};
  checked_hash(data_path, std::string(default_data) == "test.ngpd" ? "test_hash" : "train_hash");
  const fs::path manifest = data_path.parent_path() / "manifest.txt";
  if (fs::exists(manifest) && !l.model.train_hash.empty()) {
    const auto kv = read_key_values(manifest);
    if (kv.count("train_hash") && kv.at("train_hash") != l.model.train_hash) {
      throw FormatError("model " + model_path.string() + " was trained on a different dataset than " +
                        manifest.string() + " describes");
    }
  }
  l.data = data::dataset_read(data_path);
  return l;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const Loaded l = load_model_and_data(o, "test.ngpd");
  const fs::path target = l.dir / "predictions.ngpd";
  refuse_existing({target}, o.force);
  const gp::Posterior post = gp::predict(l.model, l.data.inputs);
  const auto [lo, hi] = gp::ci_band(post, 0.95);
  io::Container c;
  c.magic = std::string(io::kDatasetMagic);
  c.set_meta("kind", "predictions");
  c.set_meta("variant", gp::to_string(l.model.variant));
  c.add_tensor("mean", post.mean);
  c.add_tensor("std", post.std);
  c.add_tensor("lower95", lo);
  c.add_tensor("upper95", hi);
  io::write_file(target, c);
  out << "predictions = " << target.string() << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const Loaded l = load_model_and_data(o, "test.ngpd");
  const fs::path report_path = l.dir / "report.txt";
  refuse_existing({report_path}, o.force);
  gp::Posterior post;
  const std::uint64_t seed = [&] {
    const auto* s = l.data.find_meta("seed");
    return s ? std::stoull(*s) : 0ULL;
  }();
  metrics::EvalReport r = exp::evaluate_model(l.model, l.data, l.data.problem, seed, &post);

  std::ostringstream errors;
  errors.precision(17);
  errors << "sample,error_pct,mean_std\n";
  const std::size_t m = l.data.grid_points();
  for (std::size_t s = 0; s < r.errors.size(); ++s) {
    double sd = 0.0;
    for (std::size_t i = 0; i < m; ++i) sd += post.std[s * m + i];
    errors << s << "," << r.errors[s] << "," << sd / static_cast<double>(m) << "\n";
  }
  write_text(l.dir / "errors.csv", errors.str());

  const auto [lo, hi] = gp::ci_band(post, 0.95);
  if (l.data.grid.size() == 1) {
    std::ostringstream plot;
    plot.precision(17);
    plot << "sample,x,truth,mean,lower95,upper95\n";
    const auto [x0, x1] = l.data.extent[0];
    for (std::size_t s = 0; s < r.errors.size(); ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        const double x = m > 1 ? x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(m - 1) : x0;
        const std::size_t k = s * m + i;
        plot << s << "," << x << "," << l.data.outputs[k] << "," << post.mean[k] << "," << lo[k] << "," << hi[k]
             << "\n";
      }
    }
    write_text(l.dir / "plot.csv", plot.str());
  } else {
    std::vector<double> e(l.data.outputs.size());
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = post.mean[k] - l.data.outputs[k];
    io::Container c;
    c.magic = std::string(io::kDatasetMagic);
    c.set_meta("kind", "evaluation_fields");
    c.set_meta("variant", gp::to_string(l.model.variant));
    c.add_tensor("truth", l.data.outputs);
    c.add_tensor("mean", post.mean);
    c.add_tensor("std", post.std);
    c.add_tensor("error", Tensor::computed(l.data.outputs.shape(), std::move(e)));
    io::write_file(l.dir / "fields.ngpd", c);
  }
  std::string text = r.to_text();
  const fs::path cfg_path = l.dir / "config.toml";
  if (fs::exists(cfg_path)) {
    std::ifstream in(cfg_path);
    std::string line;
    while (std::getline(in, line)) text += "# " + line + "\n";
  }
  write_text(report_path, text);
  out << r.to_text();
  return 0;
}

struct Cell {
  std::vector<double> errors;
  std::vector<double> stds;
};

std::string pm(const std::vector<double>& v, int digits) {
  const auto s = metrics::summarize(v);
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << s.mean << " +- " << s.std;
  return os.str();
}

int cmd_report(const Options& o, std::ostream& out) {
  const fs::path root = o.out;
  if (!fs::is_directory(root)) throw UsageError(root.string() + " is not a directory");
  std::vector<metrics::EvalReport> reports;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "report.txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    std::ostringstream ss;
    ss << in.rdbuf();
    reports.push_back(metrics::parse_report(ss.str()));
  }
  if (reports.empty()) throw UsageError("no report.txt found under " + root.string());

  // rows: variants, columns: problems; mean +- std of the per-run mean error
  std::map<std::string, std::map<std::string, Cell>> table;
  std::map<std::tuple<std::string, std::string, std::size_t>, Cell> sweep;
  std::vector<std::string> problems;
  for (const auto& r : reports) {
    table[r.variant][r.problem].errors.push_back(r.mean_error);
    table[r.variant][r.problem].stds.push_back(r.mean_pred_std);
    sweep[{r.problem, r.variant, r.n_train}].stds.push_back(r.mean_pred_std);
    sweep[{r.problem, r.variant, r.n_train}].errors.push_back(r.mean_error);
    if (std::find(problems.begin(), problems.end(), r.problem) == problems.end()) problems.push_back(r.problem);
  }
  std::sort(problems.begin(), problems.end());

  std::ostringstream txt, csv;
  txt << "relative error (%), mean +- std over runs\n";
  txt << "variant";
  csv << "variant,problem,runs,mean_error_pct,std_error_pct\n";
  for (const auto& p : problems) txt << " | " << p;
  txt << "\n";
  for (const auto& [variant, row] : table) {
    txt << variant;
    for (const auto& p : problems) {
      const auto it = row.find(p);
      if (it == row.end()) {
        txt << " | -";
        continue;
      }
      txt << " | " << pm(it->second.errors, 4) << " (" << it->second.errors.size() << ")";
      const auto s = metrics::summarize(it->second.errors);
      csv << variant << "," << p << "," << it->second.errors.size() << "," << s.mean << "," << s.std << "\n";
    }
    txt << "\n";
  }
  std::ostringstream sw;
  sw << "problem,variant,n_train,runs,mean_pred_std,std_pred_std,mean_error_pct\n";
  txt << "\nsample-size sweep: mean predictive std\n";
  for (const auto& [key, cell] : sweep) {
    const auto& [p, v, n] = key;
    const auto s = metrics::summarize(cell.stds);
    sw << p << "," << v << "," << n << "," << cell.stds.size() << "," << s.mean << "," << s.std << ","
       << metrics::summarize(cell.errors).mean << "\n";
    txt << p << " " << v << " N=" << n << ": " << pm(cell.stds, 6) << " (" << cell.stds.size() << ")\n";
  }
  write_text(root / "summary.txt", txt.str());
  write_text(root / "summary.csv", csv.str());
  write_text(root / "sweep.csv", sw.str());
  out << txt.str();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian process regression with a wavelet neural operator mean"};
  app.name("nogap");
  app.require_subcommand(1, 1);
  Options o;

  auto common = [&o](CLI::App* sub, bool with_variant) {
    sub->add_option("--config", o.config, "experiment config (key = value)");
    sub->add_option("--seed", o.seed, "seed for data and initialization");
    if (with_variant) {
      sub->add_option("--variant", o.variant, "nogap | wno_only | gp_zero_mean")
          ->check(CLI::IsMember({"nogap", "wno_only", "gp_zero_mean"}));
    }
    sub->add_option("--out", o.out, "run directory")->capture_default_str();
    sub->add_flag("--force", o.force, "overwrite existing outputs");
  };
  auto* gen = app.add_subcommand("generate", "write train/test datasets and a manifest");
  common(gen, false);
  gen->add_option("--set", o.set, "override a config key (key=value)");
  auto* tr = app.add_subcommand("train", "train a variant and write a checkpoint and log");
  common(tr, true);
  tr->add_option("--set", o.set, "override a config key (key=value)");
  tr->add_option("--data", o.data, "training dataset (default <out>/train.ngpd)");
  tr->add_option("--iterations", o.iterations, "override the iteration count");
  tr->add_flag("--quiet", o.quiet, "no progress output");
  auto* pr = app.add_subcommand("predict", "posterior mean, std and 95% band for a dataset");
  common(pr, true);
  pr->add_option("--model", o.model, "checkpoint (default <out>/<variant>/model.ngpc)");
  pr->add_option("--data", o.data, "dataset (default <out>/test.ngpd)");
  auto* ev = app.add_subcommand("evaluate", "errors, coverage and plot data on a test set");
  common(ev, true);
  ev->add_option("--model", o.model, "checkpoint (default <out>/<variant>/model.ngpc)");
  ev->add_option("--data", o.data, "test dataset (default <out>/test.ngpd)");
  auto* rep = app.add_subcommand("report", "tables over every report.txt below --out");
  rep->add_option("--out", o.out, "directory to scan")->capture_default_str();

  std::vector<const char*> argv{"nogap"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    if (tr->parsed()) return cmd_train(o, out, err);
    if (pr->parsed()) return cmd_predict(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (rep->parsed()) return cmd_report(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nogap::cli
