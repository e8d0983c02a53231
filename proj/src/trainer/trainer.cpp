#include "ftbsc/trainer/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "ftbsc/numcore/ops.hpp"

namespace ftbsc::train {

using eco::Target;
using num::Tensor;

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: lr must be finite and >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(backbone_lr_multiplier >= 0.0)) throw std::invalid_argument("train config: backbone_lr_multiplier must be >= 0");
    weights.validate();
}

std::string_view name(AnchorUpdate mode) {
    return mode == AnchorUpdate::Proximal ? "proximal" : "gradient";
}

AnchorUpdate parse_anchor_update(std::string_view text) {
    if (text == "proximal") return AnchorUpdate::Proximal;
    if (text == "gradient") return AnchorUpdate::Gradient;
    throw std::invalid_argument("unknown anchor_update '" + std::string(text) + "' (expected proximal or gradient)");
}

namespace {

void put_number(std::ostream& out, double v) {
    if (std::isnan(v)) return;
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void TrainTrace::append(const TrainTrace& other) {
    const std::size_t offset = phase_names.size();
    const std::size_t base = rows.size();
    for (const auto& n : other.phase_names) phase_names.push_back(n);
    for (std::size_t s : other.phase_starts) phase_starts.push_back(base + s);
    for (TraceRow r : other.rows) {
        r.phase += offset;
        rows.push_back(r);
    }
}

void TrainTrace::validate() const {
    if (phase_starts.size() != phase_names.size()) throw std::logic_error("trace: marker/name count mismatch");
    for (std::size_t i = 0; i < phase_starts.size(); ++i) {
        if (i > 0 && phase_starts[i] <= phase_starts[i - 1]) throw std::logic_error("trace: phase markers not increasing");
        if (phase_starts[i] >= rows.size()) throw std::logic_error("trace: phase marker past the last row");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto it = std::upper_bound(phase_starts.begin(), phase_starts.end(), r);
        const std::size_t phase = static_cast<std::size_t>(it - phase_starts.begin());
        if (rows[r].phase != phase) throw std::logic_error("trace: row " + std::to_string(r) + " carries the wrong phase");
    }
}

void TrainTrace::write_csv(std::ostream& out) const {
    out << kTraceHeader << '\n';
    for (const auto& r : rows) {
        out << r.epoch << ',' << r.phase << ',';
        for (double v : {r.train.l_pred, r.train.l_phys, r.train.l_prox, r.train.l_calib, r.train.total}) {
            put_number(out, v);
            out << ',';
        }
        put_number(out, r.val_mse);
        out << '\n';
    }
}

namespace {

// Model tensors and calibration leaves under one name space, as the graph sees them.
ParameterSet pack(const ModelState& s) {
    ParameterSet all = s.params;
    if (s.calib) {
        for (Target t : eco::kFluxTargets) {
            all.insert(kgml::calib_scale_name(t), Tensor::scalar(s.calib->scale[eco::index(t)]));
            all.insert(kgml::calib_offset_name(t), Tensor::scalar(s.calib->offset[eco::index(t)]));
        }
    }
    return all;
}

ModelState unpack(const ParameterSet& all, bool has_calib) {
    ModelState s;
    for (const auto& [n, t] : all) {
        if (!n.starts_with(kgml::kCalibPrefix)) s.params.insert(n, t);
    }
    if (has_calib) {
        kgml::CalibrationHead head;
        for (Target t : eco::kFluxTargets) {
            head.scale[eco::index(t)] = all.at(kgml::calib_scale_name(t)).item();
            head.offset[eco::index(t)] = all.at(kgml::calib_offset_name(t)).item();
        }
        s.calib = head;
    }
    return s;
}

// Whether a tensor may move in a phase supervising `targets`.
bool trainable(const std::string& pname, const TargetSet& targets) {
    if (pname.starts_with(kgml::kTrunkPrefix)) return true;
    for (Target t : eco::kAllTargets) {
        if (pname.starts_with(kgml::head_prefix(t))) return targets.contains(t);
        if (t != Target::Yield && pname.starts_with(std::string(kgml::kCalibPrefix) + kgml::head_prefix(t))) {
            return targets.contains(t);
        }
    }
    throw std::logic_error("parameter '" + pname + "' belongs to no known group");
}

struct StepOutcome {
    obj::LossBreakdown parts;
    num::Gradients grads;
};

// `graph_weights` is what the gradient sees; `weights` is the objective being reported.
StepOutcome run_batch(const ModelState& state, const eco::Batch& batch, const PhaseSpec& spec,
                      const obj::LossWeights& weights, const obj::LossWeights& graph_weights,
                      const eco::Standardizer& scaler, bool with_grad) {
    num::Graph graph;
    const auto binding = with_grad ? kgml::Binding::Parameters : kgml::Binding::Constants;
    const auto model = kgml::bind(graph, state.params, state.calib ? &*state.calib : nullptr, binding, binding);
    const auto vars = kgml::forward(graph, model, batch.drivers, scaler);
    const auto loss = obj::total_loss(graph, model, vars, batch, spec.supervised, scaler, spec.anchor, graph_weights);
    StepOutcome out;
    out.parts = loss.parts;
    if (graph_weights.mu_prox != weights.mu_prox || graph_weights.rho_calib != weights.rho_calib) {
        const auto& p = out.parts;
        out.parts.total = p.l_pred + weights.lambda_phys * p.l_phys + weights.mu_prox * p.l_prox + weights.rho_calib * p.l_calib;
    }
    if (with_grad) out.grads = graph.backward(loss.total);
    return out;
}

void add_parts(obj::LossBreakdown& acc, const obj::LossBreakdown& p) {
    acc.l_pred += p.l_pred;
    acc.l_phys += p.l_phys;
    acc.l_prox += p.l_prox;
    acc.l_calib += p.l_calib;
    acc.total += p.total;
}

obj::LossBreakdown divide(obj::LossBreakdown p, double n) {
    if (n == 0.0) return p;
    p.l_pred /= n;
    p.l_phys /= n;
    p.l_prox /= n;
    p.l_calib /= n;
    p.total /= n;
    return p;
}

}  // namespace

double evaluate(const ModelState& state, std::span<const SiteDataset> sites, const TargetSet& targets,
                const eco::Standardizer& scaler, std::size_t chunk) {
    const auto refs = eco::enumerate_sequences(sites);
    obj::MseAccumulator acc(targets);
    for (std::size_t start = 0; start < refs.size(); start += chunk) {
        const std::size_t stop = std::min(refs.size(), start + chunk);
        const auto batch = eco::make_batch(std::span(refs).subspan(start, stop - start), scaler);
        acc.add(kgml::forward(state.params, state.calib, batch.drivers, scaler), batch, scaler);
    }
    return acc.has_data() ? acc.mse() : kNaN;
}

PhaseResult train_phase(const ModelState& init, const PhaseData& data, const PhaseSpec& spec, const TrainConfig& cfg,
                        const eco::Standardizer& scaler) {
    cfg.validate();
    if (spec.supervised.empty()) throw std::invalid_argument("train_phase: no supervised targets");
    if (cfg.weights.mu_prox > 0.0 && spec.anchor == nullptr) {
        throw std::invalid_argument("train_phase: mu > 0 needs an anchor");
    }
    const auto refs = eco::enumerate_sequences(data.train);
    if (refs.empty()) throw std::invalid_argument("train_phase '" + spec.label + "': no training sequences");

    const TargetSet val_targets = spec.validate_on.value_or(spec.supervised);
    const bool has_head = init.calib.has_value();
    // Without a head the calibration term has nothing to act on.
    obj::LossWeights weights = cfg.weights;
    if (!has_head) weights.rho_calib = 0.0;
    obj::LossWeights graph_weights = weights;
    const bool proximal = cfg.anchor_update == AnchorUpdate::Proximal && weights.mu_prox > 0.0;
    if (proximal) graph_weights.mu_prox = 0.0;
    const bool proximal_head = cfg.anchor_update == AnchorUpdate::Proximal && weights.rho_calib > 0.0;
    if (proximal_head) graph_weights.rho_calib = 0.0;

    ParameterSet packed = pack(init);
    Optimizer optimizer(cfg.optimizer);
    std::mt19937_64 rng(cfg.seed);

    ProximalAnchor anchor;
    anchor.theta_star = spec.anchor;
    anchor.mu = weights.mu_prox;
    anchor.applies = [&](const std::string& pname) {
        return !pname.starts_with(kgml::kCalibPrefix) && trainable(pname, spec.supervised);
    };
    anchor.rho = proximal_head ? weights.rho_calib : 0.0;
    anchor.head_term = [&](const std::string& pname) {
        if (!pname.starts_with(kgml::kCalibPrefix) || !trainable(pname, spec.supervised)) return HeadTerm::None;
        return pname.ends_with(".offset") ? HeadTerm::Offset : HeadTerm::Scale;
    };

    const LearningRate lr = [&](const std::string& pname) {
        if (has_head && !pname.starts_with(kgml::kCalibPrefix)) return cfg.lr * cfg.backbone_lr_multiplier;
        return cfg.lr;
    };

    PhaseResult result;
    result.trace.phase_names.push_back(spec.label);
    result.trace.phase_starts.push_back(0);

    auto fail = [&](const std::string& why) -> void {
        throw DivergenceError("training diverged in phase '" + spec.label + "': " + why, result.trace);
    };

    auto epoch_row = [&](std::size_t epoch, const ModelState& state, const obj::LossBreakdown& parts) {
        TraceRow row;
        row.epoch = epoch;
        row.phase = 1;
        row.train = parts;
        row.val_mse = data.validation.empty() ? kNaN : evaluate(state, data.validation, val_targets, scaler);
        if (!std::isfinite(parts.total)) fail("non-finite training loss at epoch " + std::to_string(epoch));
        result.trace.rows.push_back(row);
        return row.val_mse;
    };

    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto batches_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::vector<eco::SequenceRef>> out;
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            std::vector<eco::SequenceRef> b;
            for (std::size_t i = start; i < std::min(idx.size(), start + cfg.batch_size); ++i) b.push_back(refs[idx[i]]);
            out.push_back(std::move(b));
        }
        return out;
    };

    // Epoch 0: the starting point, evaluated without updates.
    ModelState current = init;
    {
        obj::LossBreakdown sum;
        double n = 0.0;
        for (const auto& b : batches_of(order)) {
            const auto batch = eco::make_batch(b, scaler);
            if (!obj::has_supervision(batch, spec.supervised)) continue;
            try {
                add_parts(sum, run_batch(current, batch, spec, weights, graph_weights, scaler, false).parts);
            } catch (const std::domain_error& e) {
                fail(e.what());
            }
            n += 1.0;
        }
        if (n == 0.0) throw std::invalid_argument("train_phase '" + spec.label + "': no supervised data");
        const double v = epoch_row(0, current, divide(sum, n));
        result.best = current;
        result.best_epoch = 0;
        double best_val = v;

        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
            obj::LossBreakdown epoch_sum;
            double batches = 0.0;
            for (const auto& b : batches_of(order)) {
                const auto batch = eco::make_batch(b, scaler);
                if (!obj::has_supervision(batch, spec.supervised)) continue;
                StepOutcome step;
                try {
                    step = run_batch(current, batch, spec, weights, graph_weights, scaler, true);
                } catch (const std::domain_error& e) {
                    fail(e.what());
                }
                if (!std::isfinite(step.parts.total)) fail("non-finite loss");
                for (auto& [pname, g] : step.grads) {
                    if (!trainable(pname, spec.supervised)) g.fill(0.0);
                }
                optimizer.step(packed, step.grads, lr, proximal || proximal_head ? &anchor : nullptr);
                for (const auto& [pname, t] : packed) {
                    if (!t.all_finite()) fail("non-finite value in '" + pname + "' after update");
                }
                if (has_head) {
                    for (Target t : eco::kFluxTargets) {
                        if (!(packed.at(kgml::calib_scale_name(t)).item() > 0.0)) {
                            fail("calibration scale of " + std::string(eco::name(t)) + " left (0, inf)");
                        }
                    }
                }
                current = unpack(packed, has_head);
                add_parts(epoch_sum, step.parts);
                batches += 1.0;
                for (const auto& ref : b) result.regions_seen.insert(ref.site->region);
            }
            const double val = epoch_row(epoch, current, divide(epoch_sum, batches));
            // Without a validation signal the last epoch wins.
            if (std::isnan(best_val) || val < best_val) {
                result.best = current;
                result.best_epoch = epoch;
                best_val = val;
            }
        }
    }
    result.last = current;
    result.steps = optimizer.steps();
    return result;
}

ScheduleResult five_step_schedule(const ModelState& init, const FiveStepData& data, const TrainConfig& cfg,
                                  const eco::Standardizer& scaler, std::array<bool, 5> enabled) {
    if (data.synthetic_train.empty() || data.observed_train.empty()) {
        throw std::invalid_argument("five_step_schedule: synthetic and observed data are both required");
    }
    const TargetSet fluxes = TargetSet::fluxes();
    struct Step {
        const char* label;
        TargetSet targets;
        PhaseData data;
    };
    const std::array<Step, 5> steps{{
        {"1:yield+ra/synthetic", TargetSet{Target::Yield, Target::Ra}, {data.synthetic_train, data.synthetic_validation}},
        {"2:fluxes/synthetic", fluxes, {data.synthetic_train, data.synthetic_validation}},
        {"3:yield/observed", TargetSet{Target::Yield}, {data.observed_train, data.observed_validation}},
        {"4:fluxes/synthetic", fluxes, {data.synthetic_train, data.synthetic_validation}},
        {"5:fluxes/observed", fluxes, {data.observed_train, data.observed_validation}},
    }};
    ScheduleResult out;
    out.state = init;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!enabled[i]) continue;
        PhaseSpec spec;
        spec.label = steps[i].label;
        spec.supervised = steps[i].targets;
        TrainConfig phase_cfg = cfg;
        phase_cfg.seed = cfg.seed + i;
        phase_cfg.weights.mu_prox = 0.0;  // no anchor while pretraining
        PhaseResult r;
        try {
            r = train_phase(out.state, steps[i].data, spec, phase_cfg, scaler);
        } catch (const DivergenceError& e) {
            TrainTrace partial = out.trace;
            partial.append(e.trace());
            throw DivergenceError(e.what(), std::move(partial));
        }
        out.state = r.best;
        out.steps += r.steps;
        out.trace.append(r.trace);
        out.regions_seen.insert(r.regions_seen.begin(), r.regions_seen.end());
    }
    return out;
}

namespace {

void require_regions(std::span<const SiteDataset> sites) {
    std::set<std::string> regions;
    for (const auto& s : sites) regions.insert(s.region);
    if (regions.size() < 2) throw std::invalid_argument("pretrain_global: pooled data must span at least 2 regions");
}

}  // namespace

ScheduleResult pretrain_global(const ModelState& init, const GlobalData& data, const TrainConfig& cfg,
                               const eco::Standardizer& scaler, PretrainMode mode) {
    require_regions(data.train);
    TrainConfig pooled = cfg;
    pooled.weights.mu_prox = 0.0;
    pooled.weights.rho_calib = 0.0;
    ModelState start = init;
    start.calib.reset();
    if (mode == PretrainMode::FiveStep) {
        return five_step_schedule(start, {data.synthetic_train, data.synthetic_validation, data.train, data.validation},
                                  pooled, scaler);
    }
    PhaseSpec spec;
    spec.label = "global";
    spec.supervised = TargetSet::all();
    auto r = train_phase(start, {data.train, data.validation}, spec, pooled, scaler);
    return ScheduleResult{std::move(r.best), r.steps, std::move(r.trace), std::move(r.regions_seen)};
}

PhaseResult finetune_site(const ParameterSet& theta_star, const PhaseData& data, const TrainConfig& cfg,
                          const eco::Standardizer& scaler) {
    return finetune_site_calibrated(theta_star, data, cfg, scaler, false);
}

PhaseResult finetune_site_calibrated(const ParameterSet& theta_star, const PhaseData& data, const TrainConfig& cfg,
                                     const eco::Standardizer& scaler, bool attach_head) {
    ModelState init;
    init.params = theta_star;
    if (attach_head) init.calib = kgml::CalibrationHead::identity();
    PhaseSpec spec;
    spec.label = attach_head ? "site+calib" : "site";
    spec.supervised = TargetSet::all();
    spec.anchor = &theta_star;
    return train_phase(init, data, spec, cfg, scaler);
}

}  // namespace ftbsc::train
