// Multi-step progressive quantization: repeated ADMM passes where the best
// quantized model so far (by validation accuracy) is carried forward as the
// next step's starting point.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <admmq/admm.hpp>
#include <admmq/common.hpp>
#include <admmq/model.hpp>

namespace admmq {

struct StepRecord {
  int step = 0;
  QuantMode mode = QuantMode::binary;
  double accuracy = 0.0;      // validation accuracy of the step's candidate
  double final_residual = 0.0;
  bool converged = false;
  bool budget_exhausted = false;
  std::uint64_t seed = 0;
};

struct ProgressiveState {
  int step = 0;
  Model best_model;
  QuantScheme best_scheme;
  double best_accuracy = -1.0;  // any real candidate beats the sentinel
  bool has_best = false;
  std::vector<StepRecord> history;
};

struct ProgressiveConfig {
  int num_steps = 3;
  QuantMode target = QuantMode::binary;
  // Per-step modes; empty means default_staging(target, num_steps).
  std::vector<QuantMode> staging;
  AdmmConfig admm;
  std::vector<std::string> exclude;
  std::uint64_t master_seed = 1;
  bool rho_reset_per_step = true;

  void validate() const {
    if (num_steps < 1) throw ConfigError("progressive: num_steps must be >= 1");
    if (!staging.empty() && staging.size() != static_cast<std::size_t>(num_steps))
      throw ConfigError("progressive: staging list length must equal num_steps");
    admm.validate();
  }
};

// Binary targets anneal through one ternary step first; ternary targets use
// the target mode throughout.
inline std::vector<QuantMode> default_staging(QuantMode target, int steps) {
  std::vector<QuantMode> s(steps, target);
  if (target == QuantMode::binary && steps > 1) s[0] = QuantMode::ternary;
  return s;
}

struct StepResult {
  Model model;
  QuantScheme scheme;
  double val_accuracy = 0.0;
  std::vector<TraceRow> trace;
  bool converged = false;
  bool budget_exhausted = false;
};

// One progressive step: a full ADMM pass from the given starting point.
inline StepResult run_step(const Model& start, QuantMode mode,
                           const std::vector<std::string>& exclude,
                           const DataSplit& data, const AdmmConfig& cfg) {
  QuantScheme scheme = make_scheme(start, mode, exclude);
  init_scheme_alphas(scheme, start);
  AdmmNetResult r = run_admm(start, scheme, data, cfg);
  StepResult out;
  out.model = std::move(r.model);
  out.scheme = std::move(r.scheme);
  out.val_accuracy = r.val_accuracy;
  out.trace = std::move(r.trace);
  out.converged = r.converged;
  out.budget_exhausted = r.budget_exhausted;
  return out;
}

// Keeps the candidate iff strictly better; ties keep the incumbent. History
// is appended unconditionally.
inline void compare_and_select(ProgressiveState& st, const StepResult& cand,
                               const StepRecord& record) {
  for (const SchemeEntry& e : cand.scheme.entries) {
    if (e.mode == QuantMode::excluded) continue;
    const Layer* l = cand.model.find_layer(e.layer);
    if (!l || !is_feasible(l->weights, e.mode, e.alpha))
      throw Error("compare_and_select: candidate layer '" + e.layer +
                      "' is not feasible",
                  3);
  }
  st.history.push_back(record);
  if (cand.val_accuracy > st.best_accuracy) {
    st.best_model = cand.model;
    st.best_scheme = cand.scheme;
    st.best_accuracy = cand.val_accuracy;
    st.has_best = true;
  }
  st.step += 1;
}

struct ProgressiveResult {
  ProgressiveState state;
  std::vector<TraceRow> trace;  // concatenated per-step traces + step rows
};

inline ProgressiveResult run_progressive(const Model& pretrained,
                                         const DataSplit& data,
                                         const ProgressiveConfig& cfg) {
  cfg.validate();
  std::vector<QuantMode> staging =
      cfg.staging.empty() ? default_staging(cfg.target, cfg.num_steps)
                          : cfg.staging;
  ProgressiveResult out;
  for (int s = 0; s < cfg.num_steps; ++s) {
    AdmmConfig step_cfg = cfg.admm;
    step_cfg.seed = mix_seed(cfg.master_seed, static_cast<std::uint64_t>(s));
    if (!cfg.rho_reset_per_step)
      step_cfg.rho_iteration_offset = s * cfg.admm.max_iterations;

    const Model& start = out.state.has_best ? out.state.best_model : pretrained;
    log_info("progressive step %d/%d: mode=%s seed=%llu", s + 1, cfg.num_steps,
             quant_mode_name(staging[s]),
             static_cast<unsigned long long>(step_cfg.seed));
    StepResult cand = run_step(start, staging[s], cfg.exclude, data, step_cfg);

    StepRecord rec;
    rec.step = s;
    rec.mode = staging[s];
    rec.accuracy = cand.val_accuracy;
    rec.converged = cand.converged;
    rec.budget_exhausted = cand.budget_exhausted;
    rec.seed = step_cfg.seed;
    for (const TraceRow& r : cand.trace)
      if (r.layer == "all") rec.final_residual = r.residual;

    out.trace.insert(out.trace.end(), cand.trace.begin(), cand.trace.end());
    int last_k = cand.trace.empty() ? 0 : cand.trace.back().k;
    compare_and_select(out.state, cand, rec);
    out.trace.push_back({last_k, "step", 0.0, rec.final_residual, 0.0,
                         cand.val_accuracy});
    log_info("progressive step %d done: candidate acc=%.4f best acc=%.4f",
             s + 1, cand.val_accuracy, out.state.best_accuracy);
  }
  return out;
}

}  // namespace admmq
