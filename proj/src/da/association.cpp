// SPDX-License-Identifier: Apache-2.0
#include "attentrack/da/association.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "attentrack/error.hpp"
#include "attentrack/numcore/ops.hpp"

namespace attentrack::da {

using namespace numcore;

DaModule DaModule::create(std::size_t width, std::size_t hidden, Rng& rng) {
    DaModule module;
    module.heading = nn::HeadingEmbedding::create(width, rng);
    module.h_cross = nn::CrossAttentionLayer::create(width, rng);
    module.q_cross = nn::CrossAttentionLayer::create(width, rng);
    module.target_mlp = nn::Mlp2::create(width, hidden, width, rng);
    return module;
}

void DaModule::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
    heading.collect(prefix + ".heading", out);
    h_cross.collect(prefix + ".h_cross", out);
    q_cross.collect(prefix + ".q_cross", out);
    target_mlp.collect(prefix + ".target_mlp", out);
}

Tensor update_query_features(const DaModule& module, const Tensor& prev_qfeat,
                             const Tensor& prev_qin, std::span<const double> headings,
                             const Tensor& extra_keyvals) {
    const std::size_t n = prev_qfeat.rows();
    if (n == 0) {
        throw ContractError("update_query_features: no previous tracks; skip association");
    }
    if (prev_qin.rows() != n || headings.size() != n) {
        throw DimensionError("update_query_features: misaligned inputs, qfeat " +
                             to_string(prev_qfeat.shape()) + ", qin " +
                             to_string(prev_qin.shape()) + ", " + std::to_string(headings.size()) +
                             " headings");
    }
    const Tensor headings_emb = nn::heading_embed_rows(module.heading, headings);
    const Tensor motion = nn::cross_attend(module.h_cross, prev_qfeat, headings_emb);
    const Tensor context = extra_keyvals.rows() == 0 ? prev_qin : concat_rows(prev_qin, extra_keyvals);
    return nn::cross_attend(module.q_cross, motion, context);
}

Tensor refine_targets(const DaModule& module, const Tensor& curr_qin) {
    const std::size_t d = module.target_mlp.in_width();
    if (curr_qin.cols() != d && !(curr_qin.rows() == 0)) {
        throw DimensionError("refine_targets: query width " + std::to_string(curr_qin.cols()) +
                             " does not match " + std::to_string(d));
    }
    const Tensor dead = Tensor::zeros(1, d);
    const Tensor stacked = curr_qin.rows() == 0 ? dead : concat_rows(curr_qin, dead);
    return nn::mlp2_forward(module.target_mlp, stacked);
}

AssociationMatrix::AssociationMatrix(Tensor scores) : scores_(std::move(scores)) {
    if (scores_.cols() == 0) {
        throw DimensionError("AssociationMatrix: needs at least the dead column, got " +
                             to_string(scores_.shape()));
    }
    for (double v : scores_.data()) {
        if (!std::isfinite(v)) {
            throw InputError("AssociationMatrix: non-finite score");
        }
    }
}

AssociationMatrix associate(const Tensor& updated, const Tensor& targets) {
    if (targets.rows() == 0) {
        throw DimensionError("associate: targets must include the dead row");
    }
    if (updated.cols() != targets.cols()) {
        throw DimensionError("associate: width mismatch, updated " + to_string(updated.shape()) +
                             " vs targets " + to_string(targets.shape()));
    }
    return AssociationMatrix(matmul_nt(updated, targets));
}

Tensor association_loss(const AssociationMatrix& matrix, std::span<const std::size_t> gt) {
    if (gt.size() != matrix.tracks()) {
        throw DimensionError("association_loss: " + std::to_string(gt.size()) + " labels for " +
                             std::to_string(matrix.tracks()) + " tracks");
    }
    return cross_entropy_rows(matrix.scores(), gt);
}

std::size_t outcome_column(const TrackOutcome& outcome, std::size_t dead_column) {
    if (const auto* m = std::get_if<Matched>(&outcome)) {
        return m->query;
    }
    return dead_column;
}

double outcome_score(const TrackOutcome& outcome) {
    return std::visit([](const auto& o) { return o.score; }, outcome);
}

bool AssociationDecision::is_consistent() const {
    std::vector<std::optional<std::size_t>> owners(queries.size());
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (const auto* m = std::get_if<Matched>(&tracks[t])) {
            if (m->query >= queries.size() || owners[m->query].has_value()) {
                return false;
            }
            owners[m->query] = t;
        }
    }
    return owners == queries;
}

AssociationDecision greedy_match(const AssociationMatrix& matrix) {
    const std::size_t n = matrix.tracks();
    const std::size_t dead = matrix.dead_column();
    const auto values = matrix.scores().data();
    const std::size_t cols = dead + 1;

    struct Entry {
        double score;
        std::size_t row;
        std::size_t col;
    };
    std::vector<Entry> entries;
    entries.reserve(n * cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            entries.push_back({values[i * cols + j], i, j});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(b.score, a.row, a.col) < std::tie(a.score, b.row, b.col);
    });

    AssociationDecision decision;
    decision.tracks.assign(n, Dead{0.0});
    decision.queries.assign(dead, std::nullopt);
    std::vector<bool> row_done(n, false);
    std::size_t remaining = n;
    for (const Entry& e : entries) {
        if (remaining == 0) {
            break;
        }
        if (row_done[e.row]) {
            continue;
        }
        if (e.col == dead) {
            decision.tracks[e.row] = Dead{e.score};
        } else {
            if (decision.queries[e.col].has_value()) {
                continue;
            }
            decision.queries[e.col] = e.row;
            decision.tracks[e.row] = Matched{e.col, e.score};
        }
        row_done[e.row] = true;
        --remaining;
    }
    return decision;
}

AssociationDecision fuse_dual_da(const ScoredDecision& coarse, const ScoredDecision& fine) {
    const std::size_t n = fine.matrix.tracks();
    const std::size_t m = fine.matrix.queries();
    if (coarse.matrix.tracks() != n || coarse.matrix.queries() != m ||
        coarse.decision.tracks.size() != n || fine.decision.tracks.size() != n ||
        coarse.decision.queries.size() != m || fine.decision.queries.size() != m) {
        throw ContractError("fuse_dual_da: coarse and fine decisions cover different N/M");
    }
    const std::size_t dead = m;

    struct Scored {
        TrackOutcome outcome;
        double raw;  // matrix score of the outcome's column
    };
    struct Claim {
        Scored preferred;
        std::optional<Scored> fallback;
    };
    std::vector<Claim> claims;
    claims.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const TrackOutcome& from_coarse = coarse.decision.tracks[t];
        const TrackOutcome& from_fine = fine.decision.tracks[t];
        const std::size_t col_c = outcome_column(from_coarse, dead);
        const std::size_t col_f = outcome_column(from_fine, dead);
        const Scored fine_claim{from_fine, fine.matrix.score(t, col_f)};
        if (col_c == col_f) {
            claims.push_back({fine_claim, std::nullopt});
            continue;
        }
        const Scored coarse_claim{from_coarse, coarse.matrix.score(t, col_c)};
        if (coarse_claim.raw > fine_claim.raw) {
            claims.push_back({coarse_claim, fine_claim});
        } else {
            claims.push_back({fine_claim, coarse_claim});
        }
    }

    // Settle competing claims: strongest preferred claim first.
    std::vector<std::size_t> order(n);
    for (std::size_t t = 0; t < n; ++t) {
        order[t] = t;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return claims[a].preferred.raw > claims[b].preferred.raw;
    });

    AssociationDecision fused;
    fused.tracks.assign(n, Dead{0.0});
    fused.queries.assign(m, std::nullopt);
    auto try_take = [&](std::size_t t, const TrackOutcome& outcome) {
        if (const auto* match = std::get_if<Matched>(&outcome)) {
            if (fused.queries[match->query].has_value()) {
                return false;
            }
            fused.queries[match->query] = t;
        }
        fused.tracks[t] = outcome;
        return true;
    };
    for (std::size_t t : order) {
        if (try_take(t, claims[t].preferred.outcome)) {
            continue;
        }
        if (claims[t].fallback && try_take(t, claims[t].fallback->outcome)) {
            continue;
        }
        fused.tracks[t] = Dead{fine.matrix.score(t, dead)};
    }
    return fused;
}

}  // namespace attentrack::da
