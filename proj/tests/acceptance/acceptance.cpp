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

// Acceptance suite: one check per criterion, one PASS/FAIL line each.
//
//   acceptance            run everything
//   acceptance 3 6        run only the listed criteria

#include <algorithm>
#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolens/activation_store.hpp"
#include "neurolens/density.hpp"
#include "neurolens/error.hpp"
#include "neurolens/evaluation.hpp"
#include "neurolens/intervention.hpp"
#include "neurolens/separability.hpp"
#include "neurolens/synthetic.hpp"
#include "support.hpp"

using namespace neurolens;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed checks; the first few are kept for the report line.
class Checker {
 public:
  void expect(bool cond, const std::string& what) {
    ++checks_;
    if (cond) return;
    ++failures_;
    if (failures_ <= 3) notes_.push_back(what);
  }
  void note(const std::string& s) { info_.push_back(s); }

  Outcome outcome() const {
    Outcome o;
    o.pass = failures_ == 0;
    std::ostringstream ss;
    ss << checks_ << " checks";
    if (failures_ > 0) ss << ", " << failures_ << " failed";
    for (const auto& s : info_) ss << "; " << s;
    for (const auto& s : notes_) ss << "; FAILED " << s;
    o.detail = ss.str();
    return o;
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
  std::vector<std::string> info_;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// 1. Binned density against the exact KDE.
Outcome density_fidelity() {
  Checker ck;
  const auto start = Clock::now();
  std::mt19937_64 gen(20260101);
  double worst_ratio = 0.0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 2 + gen() % 999;
    const int modes = 1 + static_cast<int>(gen() % 3);
    std::uniform_real_distribution<double> center(-20.0, 20.0), scale(0.05, 5.0);
    std::vector<double> centers(modes), scales(modes);
    for (int m = 0; m < modes; ++m) {
      centers[m] = center(gen);
      scales[m] = scale(gen);
    }
    std::vector<double> values(n);
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& v : values) {
      const auto m = gen() % modes;
      v = centers[m] + scales[m] * z(gen);
    }
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    const auto density = fit_histogram_density(values, lo, hi, 2048);
    const double h = density.bandwidth();

    // Peak of the exact estimate, located on a fine grid around the data.
    double peak = 0.0;
    const int grid = 4000;
    for (int g = 0; g <= grid; ++g) {
      const double x = lo - 3 * h + (hi - lo + 6 * h) * g / grid;
      peak = std::max(peak, kde_exact(values, h, x));
    }
    std::uniform_real_distribution<double> query(lo - 3 * h, hi + 3 * h);
    for (int q = 0; q < 20; ++q) {
      const double x = query(gen);
      const double err = std::abs(evaluate_density(density, x) - kde_exact(values, h, x));
      worst_ratio = std::max(worst_ratio, err / peak);
      ck.expect(err <= 1e-3 * peak, "case " + std::to_string(c) + " error/peak " + fmt(err / peak));
    }
  }
  const double elapsed = seconds_since(start);
  ck.expect(elapsed < 10.0, "runtime " + fmt(elapsed) + " s >= 10 s");
  ck.note("worst error/peak " + fmt(worst_ratio, 3));
  return ck.outcome();
}

// 2. JSD of identical and of disjoint concept densities.
Outcome jsd_extremes() {
  Checker ck;
  for (std::uint32_t k : {2u, 4u, 14u}) {
    const std::uint64_t per = 200;
    std::vector<std::uint32_t> labels;
    std::vector<float> values;
    std::mt19937_64 gen(k);
    std::normal_distribution<float> noise(0.0f, 0.1f);
    std::vector<float> shared(per);
    for (auto& v : shared) v = noise(gen);
    for (std::uint32_t c = 0; c < k; ++c) {
      for (std::uint64_t s = 0; s < per; ++s) {
        labels.push_back(c);
        values.push_back(shared[s]);                              // identical across concepts
        values.push_back(100.0f * static_cast<float>(c) + noise(gen));  // one cluster per concept
      }
    }
    auto d = nltest::make_dataset(2, k, labels, values);
    auto bank = fit_density_bank(d, 2048);
    std::vector<Distribution> same, apart;
    for (std::uint32_t c = 0; c < k; ++c) {
      same.push_back(discretize_density(*bank.at(0, c)));
      apart.push_back(discretize_density(*bank.at(1, c)));
    }
    const double j_same = jsd(same);
    const double j_apart = jsd(apart);
    auto rep = layer_separability(bank);
    const std::string tag = "k=" + std::to_string(k);
    ck.expect(std::abs(j_same) <= 1e-9, tag + " identical jsd " + fmt(j_same));
    ck.expect(std::abs(*rep.per_neuron[0]) <= 1e-9,
              tag + " identical D_JS " + fmt(*rep.per_neuron[0]));
    ck.expect(std::abs(*rep.per_neuron[1] - 1.0) <= 1e-6,
              tag + " disjoint D_JS " + fmt(*rep.per_neuron[1], 12));
    ck.expect(std::abs(j_apart - std::log2(static_cast<double>(k))) <= 1e-6 * std::log2(k),
              tag + " disjoint jsd " + fmt(j_apart, 12));
  }
  return ck.outcome();
}

// 3. Layer separability over a Gaussian gap sweep.
Outcome separability_monotonicity() {
  Checker ck;
  const auto start = Clock::now();
  const std::vector<double> gaps{0.0, 1.0, 2.0, 4.0, 8.0};
  auto base = SynthConfig::uniform(2000, 4, 2, {0.0, 1.0, 1.0}, 0);
  auto sweep = separability_sweep(base, gaps, 42);
  double previous = -1.0;
  std::string series;
  for (const auto& [gap, data] : sweep) {
    const double s = layer_separability(fit_density_bank(data, 2048)).layer_score;
    const double oracle = nltest::gaussian_js_distance({0.0, gap}, 1.0);
    ck.expect(s > previous, "S not increasing at gap " + fmt(gap));
    ck.expect(std::abs(s - oracle) <= 0.05,
              "gap " + fmt(gap) + " S " + fmt(s) + " vs oracle " + fmt(oracle));
    series += (series.empty() ? "" : " ") + fmt(gap) + ":" + fmt(s, 3) + "/" + fmt(oracle, 3);
    previous = s;
  }
  const double elapsed = seconds_since(start);
  ck.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s >= 60 s");
  ck.note("gap:S/oracle " + series);
  return ck.outcome();
}

// 4. APP rewrite rules and posterior normalization.
Outcome app_algebra() {
  Checker ck;
  auto narrow = [](std::vector<std::vector<std::uint64_t>> counts) {
    auto bank = std::make_shared<DensityBank>();
    bank->n_neurons = 1;
    bank->n_concepts = static_cast<std::uint32_t>(counts.size());
    bank->n_bins = static_cast<std::uint32_t>(counts[0].size());
    for (auto& c : counts) bank->densities.emplace_back(HistogramDensity(0.0, 8.0, 0.01, c));
    return bank;
  };
  auto plan_for = [](std::shared_ptr<const DensityBank> bank, Window w) {
    InterventionPlan plan;
    plan.method = Method::kApp;
    plan.n_neurons = 1;
    plan.n_concepts = bank->n_concepts;
    plan.neurons = {0};
    plan.windows = {w};
    plan.bank = std::move(bank);
    return plan;
  };
  auto bits = [](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
  };

  // Outside the window the activation is returned untouched.
  auto mixed = narrow({{0, 0, 1, 0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0, 0, 0}});
  const float outside = 6.7f;
  ck.expect(bits(app_transform(std::vector<float>{outside}, plan_for(mixed, {2.5, 1.0}))[0]) ==
                bits(outside),
            "outside-window value changed");

  // Target-only mass inside the window: pi = 1, output exactly 0.
  auto lone = narrow({{0, 0, 0, 0, 0, 0, 2, 0}, {3, 0, 0, 0, 0, 0, 0, 0}});
  ck.expect(posterior(*lone, 0, 0, 6.5) == 1.0, "pi != 1 for target-only support");
  ck.expect(bits(app_transform(std::vector<float>{6.5f}, plan_for(lone, {6.5, 0.5}))[0]) ==
                bits(0.0f),
            "pi = 1 did not give 0");

  // f_target = 4 f_other at x gives pi = 0.8 and 2.0 -> 0.4.
  auto ratio = narrow({{0, 0, 1, 0, 0, 0, 0, 0}, {3, 0, 1, 0, 0, 0, 0, 0}});
  const double pi = posterior(*ratio, 0, 0, 2.5);
  ck.expect(std::abs(pi - 0.8) <= 1e-15, "pi " + fmt(pi, 17) + " != 0.8");
  ck.expect(bits(app_value(2.0f, 0.8, Window{2.0, 1.0})) == bits(0.4f), "(1 - 0.8) * 2 != 0.4");
  ck.expect(bits(app_value(2.0f, pi, Window{2.0, 1.0})) == bits(0.4f),
            "(1 - pi) * 2 != 0.4 with computed pi");

  // Posterior normalization on fitted banks.
  auto cfg = SynthConfig::uniform(400, 10, 5, {0.0, 1.0, 0.8}, 404);
  std::mt19937_64 gen(405);
  std::uniform_real_distribution<double> mean(-2.0, 4.0), sd(0.2, 2.0);
  for (auto& c : cfg.components) c = {mean(gen), sd(gen), c.fire_prob};
  cfg.representation = Representation::kSae;
  auto bank = fit_density_bank(generate(cfg), 2048);
  std::uniform_real_distribution<double> x(-1.0, 8.0);
  double worst = 0.0;
  int evaluated = 0, fallbacks = 0;
  while (evaluated < 10000) {
    const auto j = gen() % bank.n_neurons;
    if (bank.present_count(j) == 0) continue;
    const double q = x(gen);
    double total = 0.0;
    bool fell_back = false;
    for (std::uint32_t c = 0; c < bank.n_concepts; ++c) {
      auto p = posterior_detail(bank, j, c, q);
      total += p.value;
      fell_back |= p.fallback;
    }
    ++evaluated;
    if (fell_back) {
      ++fallbacks;
      continue;
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  ck.expect(worst <= 1e-9, "max |sum pi - 1| " + fmt(worst));
  ck.note("max |sum pi - 1| " + fmt(worst, 3) + " over " + std::to_string(evaluated - fallbacks) +
          " points (" + std::to_string(fallbacks) + " underflow)");
  return ck.outcome();
}

// 5. Collateral damage ordering of the erasure methods.
Outcome method_ordering() {
  Checker ck;
  const auto start = Clock::now();
  const double means[6][4] = {{0, 0, 0, 4}, {0, 1, 2, 3}, {2, 2, 2, 2.5},
                              {3, 0, 3, 3}, {0, 3, 0, 3}, {1, 1, 3, 1}};
  auto cfg = SynthConfig::uniform(1000, 6, 4, {0.0, 1.0, 1.0}, 11);
  for (int j = 0; j < 6; ++j) {
    for (std::uint32_t c = 0; c < 4; ++c) cfg.at(j, c).mean = means[j][c];
  }
  auto fit = generate(cfg);
  cfg.seed = 12;
  auto eval = generate(cfg);
  auto bank = std::make_shared<const DensityBank>(fit_density_bank(fit, 2048));
  auto model = train_readout(fit);
  const auto before = evaluate_readout(model, eval);
  const std::uint32_t target = 3;
  std::map<Method, double> distortion, delta;
  for (auto m : {Method::kApp, Method::kRange, Method::kFull}) {
    auto plan = build_plan(fit, bank, m, target, 0.5, 0.1);
    distortion[m] = offtarget_distortion(eval, plan);
    delta[m] = erasure_metrics(before, evaluate_readout(model, eval, &plan), target).delta_acc;
  }
  ck.expect(distortion[Method::kApp] < distortion[Method::kRange],
            "distortion APP " + fmt(distortion[Method::kApp]) + " >= Range " +
                fmt(distortion[Method::kRange]));
  ck.expect(distortion[Method::kRange] < distortion[Method::kFull],
            "distortion Range " + fmt(distortion[Method::kRange]) + " >= Full " +
                fmt(distortion[Method::kFull]));
  ck.expect(delta[Method::kApp] >= delta[Method::kFull],
            "delta_acc APP " + fmt(delta[Method::kApp]) + " < Full " + fmt(delta[Method::kFull]));
  const double elapsed = seconds_since(start);
  ck.expect(elapsed < 30.0, "runtime " + fmt(elapsed) + " s >= 30 s");
  ck.note("S " + fmt(layer_separability(*bank).layer_score, 3));
  ck.note("distortion app/range/full " + fmt(distortion[Method::kApp], 3) + "/" +
          fmt(distortion[Method::kRange], 3) + "/" + fmt(distortion[Method::kFull], 3));
  ck.note("delta_acc app/full " + fmt(delta[Method::kApp], 3) + "/" + fmt(delta[Method::kFull], 3));
  return ck.outcome();
}

// 6. Separability against erasure precision over 20 configurations.
Outcome separability_correlation() {
  Checker ck;
  const auto start = Clock::now();
  // Polysemantic layout: every neuron serves two or three concepts, scaled by
  // a common gap that sets how separable the layer is.
  const double pattern[4][3] = {{0, 1, 2}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
  const std::uint32_t target = 2;
  std::vector<double> scores, app, full;
  for (int c = 0; c < 20; ++c) {
    const double gap = 0.2 * c;
    auto cfg = SynthConfig::uniform(500, 4, 3, {0.0, 1.0, 1.0}, 100 + c);
    for (int j = 0; j < 4; ++j) {
      for (std::uint32_t i = 0; i < 3; ++i) cfg.at(j, i).mean = pattern[j][i] * gap;
    }
    auto fit = generate(cfg);
    cfg.seed = 1000 + c;
    auto eval = generate(cfg);
    auto bank = std::make_shared<const DensityBank>(fit_density_bank(fit, 2048));
    auto model = train_readout(fit);
    const auto before = evaluate_readout(model, eval);
    auto delta = [&](Method m) {
      auto plan = build_plan(fit, bank, m, target, 0.5, 0.1);
      return erasure_metrics(before, evaluate_readout(model, eval, &plan), target).delta_acc;
    };
    scores.push_back(layer_separability(*bank).layer_score);
    app.push_back(delta(Method::kApp));
    full.push_back(delta(Method::kFull));
  }
  const auto r_app = pearson(scores, app);
  const auto r_full = pearson(scores, full);
  ck.expect(r_app.r > 0.6, "r(APP) " + fmt(r_app.r) + " <= 0.6");
  ck.expect(r_app.p_value < 0.01, "p(APP) " + fmt(r_app.p_value) + " >= 0.01");
  ck.expect(r_app.r > r_full.r, "r(APP) " + fmt(r_app.r) + " <= r(Full) " + fmt(r_full.r));
  const double elapsed = seconds_since(start);
  ck.expect(elapsed < 300.0, "runtime " + fmt(elapsed) + " s >= 300 s");
  ck.note("r(APP) " + fmt(r_app.r, 3) + " p " + fmt(r_app.p_value, 2) + ", r(Full) " +
          fmt(r_full.r, 3));
  return ck.outcome();
}

// 7. Delta identities of the erasure report.
Outcome metric_identities() {
  Checker ck;
  const std::vector<ConceptResult> before{{0.9, 0.9, 100}, {0.8, 0.8, 100}};
  const std::vector<ConceptResult> after{{0.9 - 0.276, 0.5, 100}, {0.8 - 0.051, 0.7, 100}};
  auto ex = erasure_metrics(before, after, 0);
  ck.expect(std::abs(ex.d_acc - 0.276) <= 1e-12, "D_Acc " + fmt(ex.d_acc, 17));
  ck.expect(std::abs(ex.d_acc_aux - 0.051) <= 1e-12, "D'_Acc " + fmt(ex.d_acc_aux, 17));
  ck.expect(std::abs(ex.delta_acc - 0.225) <= 1e-12, "delta_acc " + fmt(ex.delta_acc, 17));

  std::mt19937_64 gen(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::uint32_t k = 2 + static_cast<std::uint32_t>(gen() % 13);
    const std::uint32_t target = static_cast<std::uint32_t>(gen() % k);
    std::vector<ConceptResult> b(k), a(k);
    for (std::uint32_t c = 0; c < k; ++c) {
      b[c] = {u(gen), u(gen), 1 + gen() % 500};
      a[c] = {u(gen), u(gen), b[c].n};
    }
    auto rep = erasure_metrics(b, a, target);
    double acc = 0.0, conf = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      if (c == target) continue;
      acc += b[c].accuracy - a[c].accuracy;
      conf += b[c].confidence - a[c].confidence;
    }
    acc /= static_cast<double>(k - 1);
    conf /= static_cast<double>(k - 1);
    const double d_acc = b[target].accuracy - a[target].accuracy;
    const double d_conf = b[target].confidence - a[target].confidence;
    const std::string tag = "report " + std::to_string(t);
    ck.expect(rep.d_acc == d_acc && rep.d_conf == d_conf, tag + " target drop");
    ck.expect(rep.d_acc_aux == acc && rep.d_conf_aux == conf, tag + " auxiliary drop");
    ck.expect(rep.delta_acc == d_acc - acc, tag + " delta_acc");
    ck.expect(rep.delta_conf == d_conf - conf, tag + " delta_conf");
  }
  return ck.outcome();
}

// 8. Overlap statistics against exhaustive set arithmetic.
Outcome overlap_oracle() {
  Checker ck;
  std::mt19937_64 gen(808);
  auto oracle_iou = [](const std::vector<std::set<std::uint64_t>>& sets, std::uint32_t mask,
                       std::uint64_t n_neurons) {
    std::size_t inter = 0, uni = 0;
    for (std::uint64_t j = 0; j < n_neurons; ++j) {
      bool all = true, any = false;
      for (std::size_t c = 0; c < sets.size(); ++c) {
        if (!(mask >> c & 1)) continue;
        const bool in = sets[c].count(j) > 0;
        all &= in;
        any |= in;
      }
      inter += all;
      uni += any;
    }
    return uni ? 100.0 * static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  };
  auto compare = [&](const OverlapReport& rep, const std::vector<std::set<std::uint64_t>>& sets,
                     std::uint64_t n_neurons, const std::string& tag) {
    const auto k = static_cast<std::uint32_t>(sets.size());
    std::size_t p = 0;
    for (std::uint32_t a = 0; a < k; ++a) {
      for (std::uint32_t b = a + 1; b < k; ++b, ++p) {
        const double want = oracle_iou(sets, (1u << a) | (1u << b), n_neurons);
        ck.expect(p < rep.pairwise.size() && rep.pairwise[p].a == a && rep.pairwise[p].b == b &&
                      std::abs(rep.pairwise[p].pct - want) <= 1e-9,
                  tag + " pair " + std::to_string(a) + "," + std::to_string(b));
      }
    }
    ck.expect(p == rep.pairwise.size(), tag + " pair count");
    const double all = oracle_iou(sets, (1u << k) - 1, n_neurons);
    ck.expect(std::abs(rep.all_k_pct - all) <= 1e-9, tag + " all-k " + fmt(rep.all_k_pct));
    ck.expect(rep.by_subset_size.size() + 1 == k, tag + " subset sizes");
    for (std::uint32_t size = 2; size <= k && size - 2 < rep.by_subset_size.size(); ++size) {
      double sum = 0.0;
      int count = 0;
      for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        if (std::bitset<32>(mask).count() != size) continue;
        sum += oracle_iou(sets, mask, n_neurons);
        ++count;
      }
      ck.expect(std::abs(rep.by_subset_size[size - 2] - sum / count) <= 1e-9,
                tag + " size " + std::to_string(size));
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      const bool flagged =
          std::find(rep.flagged.begin(), rep.flagged.end(), c) != rep.flagged.end();
      ck.expect(flagged == sets[c].empty(), tag + " flag " + std::to_string(c));
    }
  };

  for (int t = 0; t < 50; ++t) {
    const std::uint64_t n_neurons = 1 + gen() % 64;
    const std::uint32_t k = 2 + static_cast<std::uint32_t>(gen() % 5);
    const std::uint64_t n_samples = k + gen() % 60;
    std::vector<std::uint32_t> labels(n_samples);
    for (std::uint64_t s = 0; s < n_samples; ++s) labels[s] = static_cast<std::uint32_t>(s % k);
    std::shuffle(labels.begin(), labels.end(), gen);
    const double density = 0.02 + 0.3 * static_cast<double>(gen() % 100) / 100.0;
    std::bernoulli_distribution fire(density);
    std::uniform_real_distribution<float> mag(0.01f, 5.0f);
    std::vector<float> values(n_samples * n_neurons);
    for (auto& v : values) v = fire(gen) ? mag(gen) : 0.0f;
    // Quantized magnitudes give the top-K ranking plenty of ties.
    if (t % 5 == 0) {
      for (auto& v : values) v = std::round(v);
    }
    auto d = nltest::make_dataset(n_neurons, k, labels, values, Representation::kSae);
    const std::string tag = "dataset " + std::to_string(t);

    std::vector<std::set<std::uint64_t>> active(k);
    for (std::uint64_t s = 0; s < n_samples; ++s) {
      for (std::uint64_t j = 0; j < n_neurons; ++j) {
        if (values[s * n_neurons + j] > 0.0f) active[labels[s]].insert(j);
      }
    }
    compare(active_neuron_overlap(d), active, n_neurons, tag + " active");

    const auto K = static_cast<std::uint32_t>(1 + gen() % n_neurons);
    std::vector<std::set<std::uint64_t>> top(k);
    for (std::uint32_t c = 0; c < k; ++c) {
      std::vector<std::pair<double, std::uint64_t>> ranked;
      for (std::uint64_t j = 0; j < n_neurons; ++j) {
        double sum = 0.0;
        double n = 0.0;
        for (std::uint64_t s = 0; s < n_samples; ++s) {
          if (labels[s] != c) continue;
          sum += values[s * n_neurons + j];
          n += 1.0;
        }
        ranked.push_back({-(sum / n), j});
      }
      std::sort(ranked.begin(), ranked.end());
      for (std::uint32_t r = 0; r < K; ++r) top[c].insert(ranked[r].second);
    }
    auto rep = topk_salient_overlap(d, K);
    ck.expect(rep.K && *rep.K == K, tag + " K");
    compare(rep, top, n_neurons, tag + " top-" + std::to_string(K));
  }

  // Dense activations: every neuron is active for every concept.
  auto cfg = SynthConfig::uniform(30, 40, 5, {3.0, 0.5, 1.0}, 809);
  cfg.representation = Representation::kSae;
  auto dense = active_neuron_overlap(generate(cfg));
  ck.expect(dense.all_k_pct == 100.0, "dense all-k " + fmt(dense.all_k_pct));
  for (const auto& p : dense.pairwise) ck.expect(p.pct == 100.0, "dense pair");
  for (double v : dense.by_subset_size) ck.expect(v == 100.0, "dense subset size");
  return ck.outcome();
}

ErrorCode code_from_name(const std::string& name) {
  static const std::map<std::string, ErrorCode> table{
      {"io", ErrorCode::kIo},
      {"bad_magic", ErrorCode::kBadMagic},
      {"version_mismatch", ErrorCode::kVersionMismatch},
      {"truncated", ErrorCode::kTruncated},
      {"non_finite", ErrorCode::kNonFinite},
      {"label_out_of_range", ErrorCode::kLabelOutOfRange},
      {"validation", ErrorCode::kValidation},
      {"format", ErrorCode::kFormat},
  };
  return table.at(name);
}

// 9. ACTV round trips and corrupted fixtures.
Outcome format_round_trip() {
  Checker ck;
  nltest::TempDir dir("nl-accept");
  std::mt19937_64 gen(909);
  for (int t = 0; t < 100; ++t) {
    auto d = nltest::random_dataset(gen, 300, 40, 14,
                                    t % 2 ? Representation::kSae : Representation::kBase);
    // Exercise awkward bit patterns too.
    if (!d.values.empty()) {
      const float specials[] = {-0.0f, std::numeric_limits<float>::denorm_min(),
                                std::numeric_limits<float>::max(),
                                -std::numeric_limits<float>::min()};
      d.values[gen() % d.values.size()] = specials[t % 4];
    }
    const auto path = dir / ("r" + std::to_string(t) + ".actv");
    write_dataset(d, path);
    const auto back = load_dataset(path);
    const bool exact =
        back == d && back.values.size() == d.values.size() &&
        std::memcmp(back.values.data(), d.values.data(), d.values.size() * sizeof(float)) == 0;
    ck.expect(exact, "round trip " + std::to_string(t));
    ck.expect(std::filesystem::file_size(path) == actv_size_bytes(d.n_samples, d.n_neurons),
              "size " + std::to_string(t));
  }

  const std::filesystem::path fixtures = NEUROLENS_FIXTURE_DIR;
  std::ifstream in(fixtures / "expected.json");
  ck.expect(static_cast<bool>(in), "fixture index missing");
  if (!in) return ck.outcome();
  const auto expected = nlohmann::json::parse(in);
  int rejected = 0;
  for (const auto& [name, kind] : expected.items()) {
    const auto path = fixtures / name;
    const std::string want = kind.get<std::string>();
    try {
      const auto d = load_dataset(path);
      ck.expect(want == "ok", name + " loaded but should fail with " + want);
      if (want == "ok") {
        ck.expect(d.n_samples == 4 && d.n_neurons == 3 && d.n_concepts == 3, name + " shape");
        ck.expect(d.labels == std::vector<std::uint32_t>{0, 1, 2, 1}, name + " labels");
        ck.expect(d.at(0, 1) == -1.25f && d.at(2, 0) == 1.0e-3f && d.at(3, 2) == 1.5f,
                  name + " values");
        ck.expect(d.manifest.hook_point == "blocks.3.hook_resid_post" && d.manifest.layer == 3,
                  name + " manifest");
      }
    } catch (const Error& e) {
      ++rejected;
      ck.expect(want != "ok" && e.code() == code_from_name(want),
                name + " rejected as " + to_string(e.code()) + ", expected " + want);
    }
  }
  ck.note(std::to_string(rejected) + " corrupted fixtures rejected");
  return ck.outcome();
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "density fidelity", density_fidelity},
      {2, "JSD bounds and extremes", jsd_extremes},
      {3, "separability monotonicity", separability_monotonicity},
      {4, "APP algebra", app_algebra},
      {5, "method ordering", method_ordering},
      {6, "separability/erasure correlation", separability_correlation},
      {7, "metric identities", metric_identities},
      {8, "overlap statistics", overlap_oracle},
      {9, "format round trip", format_round_trip},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    std::printf("%s criterion %d: %s (%.2f s) -- %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                elapsed, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
