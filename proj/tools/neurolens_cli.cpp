// Copyright 2026 The NeuroLens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// neurolens command-line front end. Talks to the toolkit only through the C API.

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolens/neurolens.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitInternal = 1;
constexpr double kWindowMult = 2.5;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
  ApiError(nl_status s, const std::string& what) : std::runtime_error(what), status(s) {}
  nl_status status;
};

int exit_code_for(nl_status s) {
  switch (s) {
    case NL_OK: return kExitOk;
    case NL_ERR_INVALID_ARGUMENT: return kExitUsage;
    case NL_ERR_NUMERICAL: return kExitNumerical;
    case NL_ERR_INTERNAL: return kExitInternal;
    default: return kExitData;
  }
}

void check(nl_status s, const std::string& context) {
  if (s != NL_OK) {
    throw ApiError(s, context + ": " + nl_status_name(s) + ": " + nl_last_error());
  }
}

struct DatasetFree {
  void operator()(nl_dataset* p) const { nl_dataset_free(p); }
};
struct BankFree {
  void operator()(nl_density_bank* p) const { nl_bank_free(p); }
};
struct PlanFree {
  void operator()(nl_plan* p) const { nl_plan_free(p); }
};
struct ReadoutFree {
  void operator()(nl_readout* p) const { nl_readout_free(p); }
};
using Dataset = std::unique_ptr<nl_dataset, DatasetFree>;
using Bank = std::unique_ptr<nl_density_bank, BankFree>;
using Plan = std::unique_ptr<nl_plan, PlanFree>;
using Readout = std::unique_ptr<nl_readout, ReadoutFree>;

/// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out(s ? s : "");
  nl_string_free(s);
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ApiError(NL_ERR_IO, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ApiError(NL_ERR_IO, "cannot write " + path.string());
  out << text;
  if (!out) throw ApiError(NL_ERR_IO, "write failed for " + path.string());
}

/// Report destination: a file when given, otherwise stdout.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Globals {
  int threads = 0;
  bool deterministic = false;
};

std::uint32_t resolve_threads(const Globals& g) {
  if (g.threads > 0) return static_cast<std::uint32_t>(g.threads);
  if (g.threads < 0) throw UsageError("--threads must be positive");
  const char* env = std::getenv("NEUROLENS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(env, &end, 10);
  if (errno != 0 || *end != '\0' || v <= 0 || v > 4096) {
    throw UsageError(std::string("NEUROLENS_THREADS must be a positive integer, got '") + env + "'");
  }
  return static_cast<std::uint32_t>(v);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance block embedded in every report.
class RunManifest {
 public:
  RunManifest(std::string command, const Globals& g) : command_(std::move(command)), globals_(g) {}

  RunManifest& input(const std::string& name, const std::string& path) {
    if (!path.empty()) inputs_[name] = path;
    return *this;
  }
  RunManifest& param(const std::string& name, json value) {
    params_[name] = std::move(value);
    return *this;
  }

  json to_json() const {
    json j = {{"command", command_},
              {"inputs", inputs_},
              {"params", params_},
              {"version", nl_version()}};
    if (!globals_.deterministic) j["timestamp"] = utc_timestamp();
    return j;
  }

 private:
  std::string command_;
  const Globals& globals_;
  json inputs_ = json::object();
  json params_ = json::object();
};

std::string render(json report, const RunManifest& run) {
  report["run"] = run.to_json();
  return report.dump(2) + "\n";
}

Dataset load_dataset(const std::string& path) {
  nl_dataset* d = nullptr;
  check(nl_dataset_load(path.c_str(), &d), "loading " + path);
  return Dataset(d);
}

Bank load_bank(const std::string& path) {
  nl_density_bank* b = nullptr;
  check(nl_bank_load(path.c_str(), &b), "loading densities " + path);
  return Bank(b);
}

Bank fit_bank(const nl_dataset* d, std::uint32_t bins, std::uint32_t threads) {
  nl_density_bank* b = nullptr;
  check(nl_bank_fit(d, bins, threads, &b), "fitting densities");
  return Bank(b);
}

std::uint32_t concept_count(const nl_dataset* d) {
  std::uint32_t k = 0;
  check(nl_dataset_shape(d, nullptr, nullptr, &k), "reading shape");
  return k;
}

nl_method parse_method(const std::string& name) {
  static const std::map<std::string, nl_method> table{{"app", NL_METHOD_APP},
                                                      {"aura", NL_METHOD_AURA},
                                                      {"range", NL_METHOD_RANGE},
                                                      {"adaptive", NL_METHOD_ADAPTIVE},
                                                      {"full", NL_METHOD_FULL}};
  const auto it = table.find(name);
  if (it == table.end()) throw UsageError("unknown method '" + name + "'");
  return it->second;
}

const char* method_name(nl_method m) {
  switch (m) {
    case NL_METHOD_APP: return "app";
    case NL_METHOD_AURA: return "aura";
    case NL_METHOD_RANGE: return "range";
    case NL_METHOD_ADAPTIVE: return "adaptive";
    case NL_METHOD_FULL: return "full";
  }
  return "unknown";
}

/// Flags shared by every command that builds a plan.
struct PlanOptions {
  std::string method;
  std::uint32_t target = 0;
  double p = std::numeric_limits<double>::quiet_NaN();
  double tau = 0.1;
  std::uint32_t bins = 2048;
  std::string densities;

  void add_to(CLI::App* cmd, bool method_required) {
    auto* m = cmd->add_option("--method", method, "app, aura, range, adaptive or full");
    if (method_required) m->required();
    cmd->add_option("--target", target, "Target concept index");
    cmd->add_option("--p", p, "Fraction of salient neurons (range, adaptive, full)");
    cmd->add_option("--tau", tau, "Firing-frequency threshold")->capture_default_str();
    cmd->add_option("--bins", bins, "Histogram bins when densities are fitted")
        ->capture_default_str();
    cmd->add_option("--densities", densities, "Density cache (.dens) to reuse");
  }

  void describe(RunManifest& run) const {
    run.param("method", method)
        .param("target", target)
        .param("p", std::isnan(p) ? json(nullptr) : json(p))
        .param("tau", tau)
        .param("B", bins)
        .param("window_mult", kWindowMult)
        .input("densities", densities);
  }
};

void require_concepts(const nl_dataset* d, std::uint32_t target) {
  const auto k = concept_count(d);
  if (k < 2) {
    throw UsageError("intervention needs a dataset with at least two concepts (k = " +
                     std::to_string(k) + ")");
  }
  if (target >= k) {
    throw UsageError("--target " + std::to_string(target) + " is out of range for k = " +
                     std::to_string(k));
  }
}

struct BuiltPlan {
  Plan plan;
  Bank bank;  // kept alive for APP plans
};

BuiltPlan build_plan(const nl_dataset* fit, const PlanOptions& opt, std::uint32_t threads) {
  const nl_method method = parse_method(opt.method);
  require_concepts(fit, opt.target);
  BuiltPlan out;
  if (!opt.densities.empty()) {
    out.bank = load_bank(opt.densities);
  } else if (method == NL_METHOD_APP) {
    out.bank = fit_bank(fit, opt.bins, threads);
  }
  nl_plan* p = nullptr;
  check(nl_plan_build(fit, out.bank.get(), method, opt.target, opt.p, opt.tau, &p),
        "building plan");
  out.plan.reset(p);
  return out;
}

/// Loads a plan file, resolving its density cache next to the plan.
BuiltPlan load_plan(const std::string& path) {
  const std::string text = read_text(path);
  const std::string ref = take([&] {
    char* s = nullptr;
    check(nl_plan_density_ref(text.c_str(), &s), "reading plan " + path);
    return s;
  }());
  BuiltPlan out;
  if (!ref.empty()) {
    fs::path cache(ref);
    if (cache.is_relative()) cache = fs::path(path).parent_path() / cache;
    out.bank = load_bank(cache.string());
  }
  nl_plan* p = nullptr;
  check(nl_plan_from_json(text.c_str(), out.bank.get(), &p), "reading plan " + path);
  out.plan.reset(p);
  return out;
}

json parse(const std::string& text) { return json::parse(text); }

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& config, std::optional<std::uint64_t> seed,
              const std::string& out, const std::string& report) {
  json cfg = parse(read_text(config));
  if (seed) cfg["seed"] = *seed;
  nl_dataset* d = nullptr;
  check(nl_synth_generate(cfg.dump().c_str(), &d), "generating " + config);
  Dataset data(d);
  check(nl_dataset_write(data.get(), out.c_str()), "writing " + out);
  RunManifest run("synth", g);
  run.input("config", config).param("seed", cfg.value("seed", std::uint64_t{0}));
  json rep = {{"output", out},
              {"dataset", parse(take([&] {
                 char* s = nullptr;
                 check(nl_dataset_summary_json(data.get(), &s), "summarizing");
                 return s;
               }()))}};
  emit(report, render(rep, run));
  return kExitOk;
}

int cmd_ingest_check(const Globals& g, const std::string& data, const std::string& out) {
  Dataset d = load_dataset(data);
  char* s = nullptr;
  check(nl_dataset_summary_json(d.get(), &s), "summarizing " + data);
  RunManifest run("ingest-check", g);
  run.input("data", data);
  emit(out, render({{"valid", true}, {"dataset", parse(take(s))}}, run));
  return kExitOk;
}

int cmd_fit_densities(const Globals& g, const std::string& data, std::uint32_t bins,
                      const std::string& out, const std::string& report) {
  Dataset d = load_dataset(data);
  Bank bank = fit_bank(d.get(), bins, resolve_threads(g));
  check(nl_bank_write(bank.get(), out.c_str()), "writing " + out);
  RunManifest run("fit-densities", g);
  run.input("data", data).param("B", bins);
  emit(report, render({{"output", out}}, run));
  return kExitOk;
}

int cmd_separability(const Globals& g, const std::string& data, const std::string& densities,
                     std::uint32_t bins, const std::string& out, const std::string& csv) {
  if (data.empty() == densities.empty()) {
    throw UsageError("separability needs exactly one of --data or --densities");
  }
  const auto threads = resolve_threads(g);
  Bank bank;
  if (!densities.empty()) {
    bank = load_bank(densities);
  } else {
    Dataset d = load_dataset(data);
    bank = fit_bank(d.get(), bins, threads);
  }
  char* s = nullptr;
  check(nl_separability_json(bank.get(), threads, &s), "scoring separability");
  json rep = parse(take(s));
  RunManifest run("separability", g);
  run.input("data", data).input("densities", densities);
  if (densities.empty()) run.param("B", bins);
  emit(out, render(rep, run));
  if (!csv.empty()) {
    std::string table = "neuron,d_js\n";
    const auto& per = rep.at("per_neuron");
    for (std::size_t j = 0; j < per.size(); ++j) {
      table += std::to_string(j) + "," + (per[j].is_null() ? "" : number(per[j].get<double>())) +
               "\n";
    }
    write_text(csv, table);
  }
  return kExitOk;
}

int cmd_overlap(const Globals& g, const std::string& data, const std::string& mode,
                std::uint32_t k, const std::string& out, const std::string& csv) {
  nl_overlap_mode m;
  if (mode == "topk") {
    m = NL_OVERLAP_TOP_K_SALIENT;
  } else if (mode == "active") {
    m = NL_OVERLAP_ALL_ACTIVE;
  } else {
    throw UsageError("--mode must be 'topk' or 'active'");
  }
  Dataset d = load_dataset(data);
  char* s = nullptr;
  check(nl_overlap_json(d.get(), m, k, &s), "computing overlap");
  json rep = parse(take(s));
  RunManifest run("overlap", g);
  run.input("data", data).param("mode", mode);
  if (m == NL_OVERLAP_TOP_K_SALIENT) run.param("K", k);
  emit(out, render(rep, run));
  if (!csv.empty()) {
    std::string table = "concept_a,concept_b,iou_pct\n";
    for (const auto& p : rep.at("pairwise")) {
      table += std::to_string(p[0].get<std::uint32_t>()) + "," +
               std::to_string(p[1].get<std::uint32_t>()) + "," + number(p[2].get<double>()) + "\n";
    }
    write_text(csv, table);
  }
  return kExitOk;
}

int cmd_build_plan(const Globals& g, const std::string& data, const PlanOptions& opt,
                   const std::string& out) {
  const auto threads = resolve_threads(g);
  Dataset fit = load_dataset(data);
  BuiltPlan built = build_plan(fit.get(), opt, threads);
  std::string ref;
  if (!opt.densities.empty()) {
    ref = fs::proximate(opt.densities, fs::absolute(out).parent_path()).string();
  } else if (built.bank) {
    const fs::path cache = out + ".dens";
    check(nl_bank_write(built.bank.get(), cache.c_str()), "writing " + cache.string());
    ref = cache.filename().string();
  }
  char* s = nullptr;
  check(nl_plan_to_json(built.plan.get(), ref.c_str(), &s), "serializing plan");
  RunManifest run("build-plan", g);
  run.input("data", data);
  opt.describe(run);
  write_text(out, render(parse(take(s)), run));
  return kExitOk;
}

/// A plan from --plan or built inline from the plan flags.
BuiltPlan obtain_plan(const std::string& plan_path, const std::string& fit_path,
                      const nl_dataset* fit, const PlanOptions& opt, std::uint32_t threads,
                      RunManifest& run) {
  if (!plan_path.empty()) {
    if (!opt.method.empty()) throw UsageError("give either --plan or --method, not both");
    run.input("plan", plan_path);
    return load_plan(plan_path);
  }
  if (opt.method.empty()) throw UsageError("one of --plan or --method is required");
  run.input("fit", fit_path);
  opt.describe(run);
  return build_plan(fit, opt, threads);
}

int cmd_intervene(const Globals& g, const std::string& data, const std::string& fit_path,
                  const std::string& plan_path, const PlanOptions& opt, const std::string& out,
                  const std::string& report) {
  const auto threads = resolve_threads(g);
  Dataset d = load_dataset(data);
  Dataset fit_owned = fit_path.empty() ? nullptr : load_dataset(fit_path);
  const nl_dataset* fit = fit_owned ? fit_owned.get() : d.get();
  RunManifest run("intervene", g);
  run.input("data", data);
  BuiltPlan built = obtain_plan(plan_path, fit_path.empty() ? data : fit_path, fit, opt, threads,
                                run);
  nl_dataset* t = nullptr;
  std::uint64_t fallbacks = 0;
  check(nl_plan_apply_dataset(built.plan.get(), d.get(), threads, &t, &fallbacks),
        "applying plan");
  Dataset transformed(t);
  check(nl_dataset_write(transformed.get(), out.c_str()), "writing " + out);
  nl_method m;
  check(nl_plan_method(built.plan.get(), &m), "reading plan");
  emit(report,
       render({{"output", out}, {"method", method_name(m)}, {"posterior_fallbacks", fallbacks}},
              run));
  return kExitOk;
}

struct EvaluateOptions {
  std::string fit;
  std::string data;
  std::string plan;
  std::string out;
  std::string csv;
  std::string scores;
  std::string run_id;
  double ppl_base = std::numeric_limits<double>::quiet_NaN();
  double ppl_post = std::numeric_limits<double>::quiet_NaN();
};

int cmd_evaluate(const Globals& g, const EvaluateOptions& eo, const PlanOptions& opt) {
  const auto threads = resolve_threads(g);
  Dataset fit = load_dataset(eo.fit);
  Dataset eval_owned = eo.data.empty() ? nullptr : load_dataset(eo.data);
  const nl_dataset* eval = eval_owned ? eval_owned.get() : fit.get();
  RunManifest run("evaluate", g);
  run.input("data", eo.data.empty() ? eo.fit : eo.data);
  BuiltPlan built = obtain_plan(eo.plan, eo.fit, fit.get(), opt, threads, run);
  run.input("fit", eo.fit);
  if (!std::isnan(eo.ppl_base)) run.param("ppl_base", eo.ppl_base);
  if (!std::isnan(eo.ppl_post)) run.param("ppl_post", eo.ppl_post);

  nl_readout* r = nullptr;
  check(nl_readout_train(fit.get(), &r), "training readout");
  Readout readout(r);
  char* s = nullptr;
  check(nl_erasure_report_json(readout.get(), eval, built.plan.get(), threads, eo.ppl_base,
                               eo.ppl_post, &s),
        "evaluating plan");
  json rep = parse(take(s));

  // Layer separability of the fitted densities, the x-axis of the correlation.
  Bank score_bank = built.bank ? std::move(built.bank)
                   : !opt.densities.empty() ? load_bank(opt.densities)
                                            : fit_bank(fit.get(), opt.bins, threads);
  check(nl_separability_json(score_bank.get(), threads, &s), "scoring separability");
  const double score = parse(take(s)).at("layer_score").get<double>();
  rep["separability_score"] = score;
  nl_method m;
  check(nl_plan_method(built.plan.get(), &m), "reading plan");
  rep["method"] = method_name(m);
  emit(eo.out, render(rep, run));

  if (!eo.csv.empty()) {
    std::string table = "concept,metric,before,after\n";
    for (const auto& c : rep.at("per_concept")) {
      const auto id = std::to_string(c.at("concept").get<std::uint32_t>());
      table += id + ",accuracy," + number(c.at("accuracy_before").get<double>()) + "," +
               number(c.at("accuracy_after").get<double>()) + "\n";
      table += id + ",confidence," + number(c.at("confidence_before").get<double>()) + "," +
               number(c.at("confidence_after").get<double>()) + "\n";
    }
    write_text(eo.csv, table);
  }
  if (!eo.scores.empty()) {
    const bool fresh = !fs::exists(eo.scores) || fs::file_size(eo.scores) == 0;
    std::ofstream append(eo.scores, std::ios::binary | std::ios::app);
    if (!append) throw ApiError(NL_ERR_IO, "cannot append to " + eo.scores);
    if (fresh) append << "score,delta_acc,method,run_id\n";
    append << number(score) << "," << number(rep.at("delta_acc").get<double>()) << ","
           << method_name(m) << "," << eo.run_id << "\n";
  }
  return kExitOk;
}

int cmd_correlate(const Globals& g, const std::string& csv, const std::string& out) {
  const std::string text = read_text(csv);
  char* s = nullptr;
  const nl_status status = nl_correlate_csv(text.c_str(), &s);
  // Too few rows for a method is a property of the table, not of the flags.
  check(status == NL_ERR_INVALID_ARGUMENT ? NL_ERR_VALIDATION : status, "correlating " + csv);
  RunManifest run("correlate", g);
  run.input("csv", csv);
  emit(out, render(parse(take(s)), run));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neurolens: separability scoring and concept erasure for neuron activations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(nl_version()));
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: NEUROLENS_THREADS or 1)");
  app.add_flag("--deterministic", g.deterministic, "Omit timestamps so reruns are byte-identical");

  std::function<int()> action;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a JSON config");
  std::string synth_config, synth_out, synth_report;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "Synthetic config JSON")->required();
  synth->add_option("--seed", synth_seed, "Override the config seed");
  synth->add_option("--out", synth_out, "Output ACTV path")->required();
  synth->add_option("--report", synth_report, "Report JSON path (default stdout)");
  synth->callback([&] {
    action = [&] { return cmd_synth(g, synth_config, synth_seed, synth_out, synth_report); };
  });

  auto* ingest = app.add_subcommand("ingest-check", "Validate an ACTV file and its manifest");
  std::string ingest_data, ingest_out;
  ingest->add_option("--data", ingest_data, "ACTV path")->required();
  ingest->add_option("--out", ingest_out, "Report JSON path (default stdout)");
  ingest->callback([&] { action = [&] { return cmd_ingest_check(g, ingest_data, ingest_out); }; });

  auto* fitd = app.add_subcommand("fit-densities", "Fit concept-conditioned densities");
  std::string fit_data, fit_out, fit_report;
  std::uint32_t fit_bins = 2048;
  fitd->add_option("--data", fit_data, "ACTV path")->required();
  fitd->add_option("--bins", fit_bins, "Histogram bins")->capture_default_str();
  fitd->add_option("--out", fit_out, "Output density cache (.dens)")->required();
  fitd->add_option("--report", fit_report, "Report JSON path (default stdout)");
  fitd->callback([&] {
    action = [&] { return cmd_fit_densities(g, fit_data, fit_bins, fit_out, fit_report); };
  });

  auto* sep = app.add_subcommand("separability", "Per-neuron and layer separability");
  std::string sep_data, sep_dens, sep_out, sep_csv;
  std::uint32_t sep_bins = 2048;
  sep->add_option("--data", sep_data, "ACTV path");
  sep->add_option("--densities", sep_dens, "Density cache instead of --data");
  sep->add_option("--bins", sep_bins, "Histogram bins")->capture_default_str();
  sep->add_option("--out", sep_out, "Report JSON path (default stdout)");
  sep->add_option("--csv", sep_csv, "Per-neuron CSV path");
  sep->callback([&] {
    action = [&] { return cmd_separability(g, sep_data, sep_dens, sep_bins, sep_out, sep_csv); };
  });

  auto* ov = app.add_subcommand("overlap", "Neuron overlap between concepts");
  std::string ov_data, ov_mode = "topk", ov_out, ov_csv;
  std::uint32_t ov_k = 80;
  ov->add_option("--data", ov_data, "ACTV path")->required();
  ov->add_option("--mode", ov_mode, "topk or active")->capture_default_str();
  ov->add_option("--k", ov_k, "Salient neurons per concept")->capture_default_str();
  ov->add_option("--out", ov_out, "Report JSON path (default stdout)");
  ov->add_option("--csv", ov_csv, "Pairwise CSV path");
  ov->callback([&] {
    action = [&] { return cmd_overlap(g, ov_data, ov_mode, ov_k, ov_out, ov_csv); };
  });

  auto* bp = app.add_subcommand("build-plan", "Build an intervention plan");
  std::string bp_data, bp_out;
  PlanOptions bp_opt;
  bp->add_option("--data", bp_data, "ACTV the plan is fitted on")->required();
  bp_opt.add_to(bp, true);
  bp->get_option("--target")->required();
  bp->add_option("--out", bp_out, "Plan JSON path")->required();
  bp->callback([&] { action = [&] { return cmd_build_plan(g, bp_data, bp_opt, bp_out); }; });

  auto* iv = app.add_subcommand("intervene", "Apply a plan to every row of a dataset");
  std::string iv_data, iv_fit, iv_plan, iv_out, iv_report;
  PlanOptions iv_opt;
  iv->add_option("--data", iv_data, "ACTV to transform")->required();
  iv->add_option("--fit", iv_fit, "ACTV an inline plan is fitted on (default --data)");
  iv->add_option("--plan", iv_plan, "Plan JSON from build-plan");
  iv_opt.add_to(iv, false);
  iv->add_option("--out", iv_out, "Transformed ACTV path")->required();
  iv->add_option("--report", iv_report, "Report JSON path (default stdout)");
  iv->callback([&] {
    action = [&] { return cmd_intervene(g, iv_data, iv_fit, iv_plan, iv_opt, iv_out, iv_report); };
  });

  auto* ev = app.add_subcommand("evaluate", "Erasure metrics for a plan");
  EvaluateOptions eo;
  PlanOptions ev_opt;
  ev->add_option("--fit", eo.fit, "ACTV the readout and densities are fitted on")->required();
  ev->add_option("--data", eo.data, "Held-out ACTV to evaluate on (default --fit)");
  ev->add_option("--plan", eo.plan, "Plan JSON from build-plan");
  ev_opt.add_to(ev, false);
  ev->add_option("--ppl-base", eo.ppl_base, "Perplexity without the intervention");
  ev->add_option("--ppl-post", eo.ppl_post, "Perplexity with the intervention");
  ev->add_option("--out", eo.out, "Report JSON path (default stdout)");
  ev->add_option("--csv", eo.csv, "Per-concept CSV path");
  ev->add_option("--scores", eo.scores, "CSV to append a score,delta_acc,method,run_id row to");
  ev->add_option("--run-id", eo.run_id, "Identifier for the appended row");
  ev->callback([&] { action = [&] { return cmd_evaluate(g, eo, ev_opt); }; });

  auto* co = app.add_subcommand("correlate", "Pearson r between separability and delta_acc");
  std::string co_csv, co_out;
  co->add_option("--csv", co_csv, "CSV with score and delta_acc columns")->required();
  co->add_option("--out", co_out, "Report JSON path (default stdout)");
  co->callback([&] { action = [&] { return cmd_correlate(g, co_csv, co_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "neurolens: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ApiError& e) {
    std::cerr << "neurolens: " << e.what() << "\n";
    return exit_code_for(e.status);
  } catch (const json::exception& e) {
    std::cerr << "neurolens: malformed JSON: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "neurolens: " << e.what() << "\n";
    return kExitInternal;
  }
}
