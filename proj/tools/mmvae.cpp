// mmvae: command-line front end for data generation, training, experiments,
// measures, comparison, plotting and schedule inspection.
//
// Configuration comes from an optional JSON file (--config) plus dotted
// overrides of the form --key.path=value (e.g. --schedule.kind=constant1).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <mmvae/checkpoint.hpp>
#include <mmvae/harness/config.hpp>
#include <mmvae/harness/experiment.hpp>
#include <mmvae/harness/figures.hpp>
#include <mmvae/harness/train.hpp>
#include <mmvae/measures.hpp>
#include <mmvae/schedules.hpp>
#include <mmvae/synthetic.hpp>

namespace fs = std::filesystem;
using namespace mmvae;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInput = 3, kRunFailed = 4 };

// Pulls `--key=value` overrides whose first path segment is a config field
// out of argv, leaving the rest for CLI11.
std::vector<std::string> extract_overrides(int argc, char** argv,
                                           std::vector<std::string>& rest) {
  const auto fields = to_json(RunConfig{});
  std::vector<std::string> overrides;
  for (int i = 0; i < argc; ++i) {
    std::string a = argv[i];
    if (i > 0 && a.starts_with("--") && a.find('=') != std::string::npos) {
      const auto key = a.substr(2, a.find('=') - 2);
      const auto head = key.substr(0, key.find('.'));
      if (fields.contains(head)) {
        overrides.push_back(a);
        continue;
      }
    }
    rest.push_back(a);
  }
  return overrides;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") std::cout << text;
  else write_file(out_path, text);
}

std::vector<ScheduleKind> parse_schedules(const std::string& list) {
  std::vector<ScheduleKind> out;
  if (list == "all") return {std::begin(kAllSchedules), std::end(kAllSchedules)};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(schedule_kind_from_string(item));
  return out;
}

ProgressFn stderr_progress(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

nlohmann::json report_json(const MeasureReport& r, const ModalityLayout& layout) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["eval_set_size"] = r.eval_set_size;
  j["baseline"] = r.baseline;
  j["prediction_error"] = r.prediction_error;
  for (std::size_t m = 0; m < layout.modality_count(); ++m) {
    const auto& name = layout.modality(m).name;
    j["single_modality_error"]["modality"][name] = r.single_modality_error_modality[m];
    j["single_modality_error"]["all"][name] = r.single_modality_error_all[m];
    j["loss_of_precision"]["modality"][name] = r.loss_of_precision_modality[m];
    j["loss_of_precision"]["all"][name] = r.loss_of_precision_all[m];
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> rest;
  std::vector<std::string> overrides;
  try {
    overrides = extract_overrides(argc, argv, rest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  CLI::App app{"Multimodal VAE integration-measure lab"};
  app.require_subcommand(1);
  app.footer(
      "Config overrides: --<field>=<value>, dotted for nested fields, e.g.\n"
      "  --total_epochs=8000 --schedule.kind=dyn_plateau0 --dataset.n_samples=2000\n"
      "Default output root: $" + std::string(kOutputRootEnv) + " (else ./runs).");

  std::string config_path;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config or experiment manifest");
  };

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  add_common(gen);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "CSV path (default stdout)");

  auto* train = app.add_subcommand("train", "Train one model and record its curves");
  add_common(train);
  train->add_flag("-q,--quiet", quiet, "No progress on stderr");

  auto* exp = app.add_subcommand("experiment", "Seeded multi-run training per schedule");
  add_common(exp);
  std::string schedules;
  exp->add_option("-s,--schedules", schedules,
                  "Comma-separated schedules or 'all'; each goes to <output_dir>/<kind>");
  exp->add_flag("-q,--quiet", quiet, "No progress on stderr");

  auto* meas = app.add_subcommand("measure", "Integration measures of a checkpoint");
  add_common(meas);
  std::string ckpt_path, meas_out;
  meas->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
  meas->add_option("-o,--out", meas_out, "JSON path (default stdout)");

  auto* cmp = app.add_subcommand("compare", "Tail-window means across experiments");
  std::vector<std::string> cmp_dirs;
  std::string cmp_out;
  cmp->add_option("dirs", cmp_dirs, "Experiment directories")->required();
  cmp->add_option("-o,--out", cmp_out, "CSV path (default stdout)");

  auto* plot = app.add_subcommand("plot", "SVG charts from experiment outputs");
  std::vector<std::string> plot_dirs;
  std::string plot_out;
  plot->add_option("dirs", plot_dirs, "Experiment directories")->required();
  plot->add_option("-o,--out", plot_out, "Figure directory (default <first dir>/figures)");

  auto* dump = app.add_subcommand("schedule-dump", "Print the beta schedule as CSV");
  add_common(dump);
  std::int64_t stride = 1;
  std::string dump_out;
  dump->add_option("--stride", stride, "Epoch stride")->check(CLI::PositiveNumber);
  dump->add_option("-o,--out", dump_out, "CSV path (default stdout)");

  try {
    std::vector<const char*> cargv;
    for (const auto& a : rest) cargv.push_back(a.c_str());
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const auto c = load_run_config(config_path, overrides);
      if (c.dataset.source != "synthetic")
        throw ConfigurationError("gen-data needs dataset.source=synthetic");
      const auto raw = generate_synthetic_raw(c.dataset.seed, c.dataset.n_samples,
                                              c.dataset.synthetic);
      std::ostringstream os;
      write_dataset_csv(os, raw, ModalityLayout::standard());
      emit(gen_out, os.str());
      return kOk;
    }
    if (*train) {
      auto c = load_run_config(config_path, overrides);
      c.runs = 1;
      ExperimentOptions opt{stderr_progress(quiet), true};
      const auto r = run_experiment(c, opt);
      std::cerr << "wrote " << c.output_dir << '\n';
      return r.succeeded() == r.runs.size() ? kOk : kRunFailed;
    }
    if (*exp) {
      auto c = load_run_config(config_path, overrides);
      if (schedules.empty()) {
        const auto r = run_experiment(c, {stderr_progress(quiet), false});
        std::cerr << "wrote " << c.output_dir << " (" << r.succeeded() << "/"
                  << r.runs.size() << " runs ok)\n";
        return r.succeeded() == r.runs.size() ? kOk : kRunFailed;
      }
      const fs::path root = c.output_dir;
      std::vector<ExperimentOutputs> outs;
      bool all_ok = true;
      for (auto kind : parse_schedules(schedules)) {
        auto ck = c;
        ck.schedule.kind = kind;
        ck.output_dir = (root / std::string(to_string(kind))).string();
        ck.validate();
        const auto r = run_experiment(ck, {stderr_progress(quiet), false});
        all_ok = all_ok && r.succeeded() == r.runs.size();
        outs.push_back(load_experiment(ck.output_dir));
      }
      write_comparison(compare_schedules(outs), root / "comparison.csv");
      std::vector<SeriesPoint> all;
      for (const auto& o : outs) all.insert(all.end(), o.points.begin(), o.points.end());
      if (c.figures) write_figures(all, root / "figures");
      std::cerr << "wrote " << root.string() << '\n';
      return all_ok ? kOk : kRunFailed;
    }
    if (*meas) {
      const auto c = load_run_config(config_path, overrides);
      const auto cp = load_checkpoint(ckpt_path);
      const auto data = load_data(c);
      const auto rep = evaluate_measures(cp.model, data.eval, cp.epoch, c.eval_set_size);
      emit(meas_out, report_json(rep, cp.model.layout()).dump(2) + "\n");
      return kOk;
    }
    if (*cmp) {
      std::vector<ExperimentOutputs> outs;
      for (const auto& d : cmp_dirs) outs.push_back(load_experiment(d));
      const auto comparison = compare_schedules(outs);
      std::ostringstream os;
      write_comparison_csv(os, comparison.stats, comparison.windows);
      emit(cmp_out, os.str());
      return kOk;
    }
    if (*plot) {
      std::vector<SeriesPoint> all;
      for (const auto& d : plot_dirs) {
        const auto o = load_experiment(d);
        all.insert(all.end(), o.points.begin(), o.points.end());
      }
      const fs::path dir =
          plot_out.empty() ? fs::path(plot_dirs.front()) / "figures" : fs::path(plot_out);
      for (const auto& f : write_figures(all, dir)) std::cout << f.string() << '\n';
      return kOk;
    }
    if (*dump) {
      const auto c = load_run_config(config_path, overrides);
      std::ostringstream os;
      write_schedule_csv(os, schedule_table(c.beta_schedule(), stride));
      emit(dump_out, os.str());
      return kOk;
    }
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IngestionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ExperimentError& e) {
    std::cerr << "experiment failed: " << e.what() << '\n';
    return kRunFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailed;
  }
  return kUsage;
}
