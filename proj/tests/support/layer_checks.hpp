// SPDX-License-Identifier: Apache-2.0
// Random small instances of every trainable block, each reduced to a scalar
// loss and run through grad_check.
#pragma once

#include <string>
#include <vector>

#include "attentrack/da/association.hpp"
#include "attentrack/nn/attention.hpp"
#include "attentrack/numcore/ops.hpp"
#include "attentrack/pipeline/model.hpp"
#include "attentrack/qem/enhance.hpp"
#include "attentrack/sim/world.hpp"
#include "attentrack/train/train.hpp"
#include "gradcheck.hpp"

namespace attentrack::check {

struct LayerCheck {
    std::string layer;
    GradCheckResult result;
};

inline numcore::Tensor random_input(std::size_t r, std::size_t c, Rng& rng) {
    std::vector<double> v(r * c);
    for (auto& x : v) {
        x = rng.normal();
    }
    return numcore::Tensor::from(r, c, std::move(v));
}

inline std::vector<numcore::NamedParameter> collected(const auto& block) {
    std::vector<numcore::NamedParameter> out;
    block.collect("p", out);
    return out;
}

/// Weighted sum so every output entry reaches the loss with its own factor.
inline numcore::Tensor probe(const numcore::Tensor& y, const numcore::Tensor& w) {
    return numcore::sum(numcore::mul(y, w));
}

/// Biases start at zero, which puts the dead query's ReLU units exactly on
/// the kink; move them off before differencing.
inline void jitter_biases(const std::vector<numcore::NamedParameter>& params, Rng& rng) {
    for (const auto& p : params) {
        if (p.name.ends_with(".b1") || p.name.ends_with(".b2") || p.name.ends_with(".bias")) {
            for (double& b : numcore::Tensor(p.tensor).mutable_data()) b = rng.normal(0.0, 0.1);
        }
    }
}

inline std::vector<LayerCheck> check_all_layers(std::uint64_t seed) {
    using namespace numcore;
    constexpr std::size_t d = 6;
    Rng rng(seed);
    std::vector<LayerCheck> out;

    {  // projections + attention + post-norm
        auto layer = nn::CrossAttentionLayer::create(d, rng);
        // non-trivial norm parameters so their gradients are exercised
        for (double& g : layer.ln_gamma.mutable_data()) g = rng.uniform(0.5, 1.5);
        for (double& b : layer.ln_beta.mutable_data()) b = rng.normal(0.0, 0.3);
        const Tensor q = random_input(3, d, rng), kv = random_input(4, d, rng), w = random_input(3, d, rng);
        out.push_back({"cross_attention", grad_check([&] { return probe(nn::cross_attend(layer, q, kv), w); },
                                                     collected(layer))});
    }
    {
        auto mlp = nn::Mlp2::create(d, 2 * d, d, rng);
        for (double& b : mlp.b1.mutable_data()) b = rng.normal(0.0, 0.1);
        const Tensor x = random_input(4, d, rng), w = random_input(4, d, rng);
        out.push_back({"mlp", grad_check([&] { return probe(nn::mlp2_forward(mlp, x), w); }, collected(mlp))});
    }
    {
        auto emb = nn::HeadingEmbedding::create(d, rng);
        const std::vector<double> thetas = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const Tensor w = random_input(2, d, rng);
        out.push_back({"heading_embedding",
                       grad_check([&] { return probe(nn::heading_embed_rows(emb, thetas), w); }, collected(emb))});
    }
    {
        auto layer = nn::CrossAttentionLayer::create(d, rng);
        const Tensor qin = random_input(4, d, rng), prev = random_input(3, d, rng), w = random_input(4, d, rng);
        const std::vector<bool> mask = {false, true, false, false};
        out.push_back({"qem", grad_check([&] { return probe(qem::enhance_queries(layer, qin, prev, mask).embeddings, w); },
                                         collected(layer))});
    }
    {
        auto module = da::DaModule::create(d, 2 * d, rng);
        jitter_biases(collected(module), rng);
        const Tensor qfeat = random_input(3, d, rng), qin = random_input(3, d, rng);
        const Tensor curr = random_input(4, d, rng), extra = random_input(2, d, rng);
        const std::vector<double> headings = {0.3, -1.2, 2.5};
        const std::vector<std::size_t> labels = {1, 4, 0};
        auto loss = [&] {
            const Tensor updated = da::update_query_features(module, qfeat, qin, headings, extra);
            return da::association_loss(da::associate(updated, da::refine_targets(module, curr)), labels);
        };
        out.push_back({"data_association", grad_check(loss, collected(module))});
    }
    {  // whole model in fusion mode: encoder, QEM, both feature layers, both DA heads, detection head
        pipeline::ModelConfig cfg;
        cfg.width = 8;
        cfg.hidden = 8;
        cfg.mode = pipeline::Mode::fusion;
        cfg.r_gate_m = 1e9;  // every query gets QEM context
        cfg.init_seed = seed;
        auto model = pipeline::Model::create(cfg);
        jitter_biases(model.parameters(), rng);
        sim::ScenarioConfig sc;
        sc.num_frames = 3;
        sc.initial_objects = 4;
        sc.max_objects = 5;
        sc.p_miss = 0.0;
        const auto scenario = sim::generate_scenario(sc, seed);
        train::TrainingPair pair;
        pair.context = {scenario.frames[0]};
        pair.prev = scenario.frames[1];
        pair.curr = scenario.frames[2];
        pair.labels = sim::label_associations(pair.prev, pair.curr);
        auto loss = [&] {
            const auto l = train::pair_losses(model, pair);
            return add(l.association, l.detection);
        };
        out.push_back({"model", grad_check(loss, model.parameters(), 1e-6, 1e-3, 24)});
    }
    return out;
}

}  // namespace attentrack::check
