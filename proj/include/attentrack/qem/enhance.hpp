// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "attentrack/nn/attention.hpp"
#include "attentrack/numcore/tensor.hpp"

namespace attentrack::qem {

using numcore::Tensor;

struct EnhancedQueries {
    Tensor embeddings;
    /// true where the query had no previous-frame support; those rows are
    /// copied from the input unchanged.
    std::vector<bool> newborn_mask;
};

/// Injects previous-frame object features into the current query inputs.
///
/// With no previous features every row passes through. Otherwise each query
/// cross-attends over all of `prev_feats`, except rows flagged in
/// `newborn_mask`, which pass through bit-exactly. An empty mask means no
/// query is new-born.
EnhancedQueries enhance_queries(const nn::CrossAttentionLayer& layer, const Tensor& curr_qin,
                                const Tensor& prev_feats, std::vector<bool> newborn_mask = {});

}  // namespace attentrack::qem
