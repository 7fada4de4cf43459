// SPDX-License-Identifier: Apache-2.0
#include "attentrack/qem/enhance.hpp"

#include <algorithm>

#include "attentrack/error.hpp"
#include "attentrack/numcore/ops.hpp"

namespace attentrack::qem {

EnhancedQueries enhance_queries(const nn::CrossAttentionLayer& layer, const Tensor& curr_qin,
                                const Tensor& prev_feats, std::vector<bool> newborn_mask) {
    const std::size_t m = curr_qin.rows();
    if (m > 0 && curr_qin.cols() != layer.width()) {
        throw DimensionError("enhance_queries: query width " + std::to_string(curr_qin.cols()) +
                             " does not match layer width " + std::to_string(layer.width()));
    }
    if (prev_feats.rows() > 0 && prev_feats.cols() != layer.width()) {
        throw DimensionError("enhance_queries: previous feature width " +
                             std::to_string(prev_feats.cols()) + " does not match layer width " +
                             std::to_string(layer.width()));
    }
    if (newborn_mask.empty()) {
        newborn_mask.assign(m, false);
    } else if (newborn_mask.size() != m) {
        throw DimensionError("enhance_queries: mask of " + std::to_string(newborn_mask.size()) +
                             " entries for " + std::to_string(m) + " queries");
    }
    if (prev_feats.rows() == 0) {
        return {curr_qin, std::vector<bool>(m, true)};
    }
    if (m == 0 || std::all_of(newborn_mask.begin(), newborn_mask.end(), [](bool b) { return b; })) {
        return {curr_qin, std::move(newborn_mask)};
    }
    const Tensor attended = nn::cross_attend(layer, curr_qin, prev_feats);
    Tensor merged = numcore::where_rows(newborn_mask, curr_qin, attended);
    return {std::move(merged), std::move(newborn_mask)};
}

}  // namespace attentrack::qem
