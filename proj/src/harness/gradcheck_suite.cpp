#include "ftbsc/harness/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "ftbsc/ecosyslite/generator.hpp"
#include "ftbsc/numcore/gradcheck.hpp"
#include "ftbsc/objective/losses.hpp"

namespace ftbsc::harness {

namespace {

using eco::Target;
using num::Tensor;

// Days [start, start + len) of every sequence in the batch.
eco::Batch window(const eco::Batch& b, std::size_t start, std::size_t len) {
    const std::size_t B = b.size();
    const std::size_t F = b.drivers.dim(2);
    auto slice2 = [&](const Tensor& t) {
        Tensor out({len, B});
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t j = 0; j < B; ++j) out(i, j) = t(start + i, j);
        }
        return out;
    };
    eco::Batch w;
    w.drivers = Tensor({len, B, F});
    std::copy_n(b.drivers.data().begin() + static_cast<std::ptrdiff_t>(start * B * F), len * B * F,
                w.drivers.data().begin());
    w.gpp = slice2(b.gpp);
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        w.flux[k] = slice2(b.flux[k]);
        w.flux_mask[k] = slice2(b.flux_mask[k]);
    }
    w.yield = b.yield;
    w.yield_mask = b.yield_mask;
    w.sites = b.sites;
    return w;
}

struct Problem {
    num::ParameterSet theta;
    num::ParameterSet anchor;
    kgml::CalibrationHead head;
    eco::Batch batch;
    eco::Standardizer scaler;
};

Problem make_problem(std::uint64_t seed) {
    eco::GeneratorConfig g;
    g.total_site_years = 12;
    g.years_per_site = 2;
    g.seed = seed;
    std::vector<eco::SiteDataset> sites;
    for (std::size_t r = 0; r < g.regions.size(); ++r) {
        for (auto& s : eco::generate_region(r, g)) {
            sites.push_back(eco::add_observation_noise(s, eco::NoiseLevels::uniform(0.3), seed));
        }
    }
    Problem p;
    p.scaler = eco::Standardizer::fit(sites);
    const auto refs = eco::enumerate_sequences(sites);
    const std::vector<eco::SequenceRef> two{refs.front(), refs.back()};
    p.batch = window(eco::make_batch(two, p.scaler), 150, 6);
    p.batch.flux_mask[1](2, 0) = 0.0;  // exercise masking

    kgml::ModelConfig m;
    m.basis_hidden = 4;
    m.head_hidden = 3;
    m.seed = seed;
    p.theta = kgml::init_model(m);
    std::mt19937_64 rng(seed + 17);
    std::normal_distribution<double> n(0.0, 0.1);
    auto flat = p.theta.flatten();
    for (auto& v : flat) v += n(rng);
    p.anchor = p.theta;
    p.anchor.unflatten(flat);
    for (std::size_t k = 0; k < eco::kFluxCount; ++k) {
        p.head.scale[k] = 1.0 + n(rng);
        p.head.offset[k] = n(rng);
    }
    return p;
}

using Term = std::function<num::Var(num::Graph&, const kgml::BoundModel&, const kgml::FluxVars&, const Problem&)>;

num::ScalarObjective objective(const Problem& prob, const Term& term) {
    return [&prob, term](const num::ParameterSet& s, num::Gradients* grad) {
        num::ParameterSet theta;
        kgml::CalibrationHead head;
        for (const auto& [name, t] : s) {
            if (!name.starts_with(kgml::kCalibPrefix)) theta.insert(name, t);
        }
        for (Target t : eco::kFluxTargets) {
            head.scale[eco::index(t)] = s.at(kgml::calib_scale_name(t)).item();
            head.offset[eco::index(t)] = s.at(kgml::calib_offset_name(t)).item();
        }
        num::Graph g;
        const auto model = kgml::bind(g, theta, &head);
        const auto vars = kgml::forward(g, model, prob.batch.drivers, prob.scaler);
        const num::Var loss = term(g, model, vars, prob);
        if (grad != nullptr) *grad = g.backward(loss);
        return loss.value().item();
    };
}

}  // namespace

std::vector<GradcheckEntry> gradcheck_suite(const std::vector<std::uint64_t>& seeds, double step) {
    const std::vector<std::pair<std::string, Term>> terms{
        {"pred",
         [](num::Graph&, const kgml::BoundModel&, const kgml::FluxVars& v, const Problem& p) {
             return obj::loss_pred(v, p.batch, obj::TargetSet::all(), p.scaler);
         }},
        {"phys",
         [](num::Graph&, const kgml::BoundModel&, const kgml::FluxVars& v, const Problem& p) {
             return obj::loss_phys(v, p.batch.gpp, obj::LossWeights{});
         }},
        {"prox", [](num::Graph& g, const kgml::BoundModel& m, const kgml::FluxVars&,
                    const Problem& p) { return obj::loss_prox(g, m, p.anchor); }},
        {"calib", [](num::Graph&, const kgml::BoundModel& m, const kgml::FluxVars&,
                     const Problem&) { return obj::loss_calib(m); }},
        {"total",
         [](num::Graph& g, const kgml::BoundModel& m, const kgml::FluxVars& v, const Problem& p) {
             obj::LossWeights w;
             w.lambda_phys = 0.5;
             w.mu_prox = 0.3;
             w.rho_calib = 0.2;
             return obj::total_loss(g, m, v, p.batch, obj::TargetSet::all(), p.scaler, &p.anchor, w).total;
         }},
    };
    std::vector<GradcheckEntry> out;
    for (std::uint64_t seed : seeds) {
        const Problem prob = make_problem(seed);
        num::ParameterSet params = prob.theta;
        for (Target t : eco::kFluxTargets) {
            params.insert(kgml::calib_scale_name(t), Tensor::scalar(prob.head.scale[eco::index(t)]));
            params.insert(kgml::calib_offset_name(t), Tensor::scalar(prob.head.offset[eco::index(t)]));
        }
        for (const auto& [label, term] : terms) {
            const auto r = num::gradcheck(objective(prob, term), params, step);
            out.push_back({seed, label, r.max_relative_error, r.worst_parameter});
        }
    }
    return out;
}

double max_error(const std::vector<GradcheckEntry>& entries) {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_relative_error);
    return m;
}

}  // namespace ftbsc::harness
