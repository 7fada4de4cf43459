// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "attentrack/nn/attention.hpp"
#include "attentrack/numcore/tensor.hpp"

namespace attentrack::da {

using numcore::Tensor;

/// Learned part of one data-association head: the query-feature update
/// (H-cross then Q-cross) and the target refinement MLP.
struct DaModule {
    nn::HeadingEmbedding heading;
    nn::CrossAttentionLayer h_cross;
    nn::CrossAttentionLayer q_cross;
    nn::Mlp2 target_mlp;

    static DaModule create(std::size_t width, std::size_t hidden, Rng& rng);

    std::size_t width() const noexcept { return h_cross.width(); }
    void collect(const std::string& prefix, std::vector<numcore::NamedParameter>& out) const;
};

/// Previous-frame features updated for association, one row per track.
///
/// H-cross attends from prev_qfeat over the heading embeddings, Q-cross then
/// attends from that result over prev_qin. `extra_keyvals`, when non-empty,
/// is stacked under prev_qin as additional Q-cross context (the fine-stream
/// head passes the coarse Q-feat here).
Tensor update_query_features(const DaModule& module, const Tensor& prev_qfeat,
                             const Tensor& prev_qin, std::span<const double> headings,
                             const Tensor& extra_keyvals = Tensor());

/// (M+1)×d targets: the MLP applied to curr_qin with a zero "dead query" row
/// appended before the MLP, so the last row is a learned constant.
Tensor refine_targets(const DaModule& module, const Tensor& curr_qin);

/// N×(M+1) track-to-query scores; column M is the dead column.
class AssociationMatrix {
public:
    /// Throws DimensionError for a zero-column matrix and InputError for
    /// non-finite entries.
    explicit AssociationMatrix(Tensor scores);

    const Tensor& scores() const noexcept { return scores_; }
    std::size_t tracks() const noexcept { return scores_.rows(); }
    std::size_t queries() const noexcept { return scores_.cols() - 1; }
    std::size_t dead_column() const noexcept { return queries(); }
    double score(std::size_t track, std::size_t column) const {
        return scores_.at(track, column);
    }

private:
    Tensor scores_;
};

/// updated · targetsᵀ. No softmax; that only lives inside the loss.
AssociationMatrix associate(const Tensor& updated, const Tensor& targets);

/// Mean over tracks of the cross entropy of each row against its target
/// column; gt entries may name the dead column.
Tensor association_loss(const AssociationMatrix& matrix, std::span<const std::size_t> gt);

struct Matched {
    std::size_t query;
    double score;
    friend bool operator==(const Matched&, const Matched&) = default;
};

struct Dead {
    double score;  // the track's dead-column score
    friend bool operator==(const Dead&, const Dead&) = default;
};

using TrackOutcome = std::variant<Matched, Dead>;

/// Column an outcome points at (queries() for Dead).
std::size_t outcome_column(const TrackOutcome& outcome, std::size_t dead_column);
double outcome_score(const TrackOutcome& outcome);

struct AssociationDecision {
    /// One outcome per previous-frame track.
    std::vector<TrackOutcome> tracks;
    /// Per current query: the owning track, or nullopt for a new-born query.
    std::vector<std::optional<std::size_t>> queries;

    /// Each query claimed at most once and the two views are inverses.
    bool is_consistent() const;
    friend bool operator==(const AssociationDecision&, const AssociationDecision&) = default;
};

/// Greedy assignment: repeatedly take the largest remaining score, retire its
/// row, and retire its column unless it is the dead column. Ties go to the
/// lower row, then the lower column.
AssociationDecision greedy_match(const AssociationMatrix& matrix);

struct ScoredDecision {
    const AssociationMatrix& matrix;
    const AssociationDecision& decision;
};

/// Merges the coarse and fine heads' decisions. Tracks on which both agree
/// keep the fine outcome; conflicts go to the outcome with the larger raw
/// score. Competing claims on one query are then settled greedily by score,
/// losers falling back to their other outcome when free, else to Dead.
AssociationDecision fuse_dual_da(const ScoredDecision& coarse, const ScoredDecision& fine);

}  // namespace attentrack::da
