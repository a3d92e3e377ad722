// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/types/label_space.hpp"

namespace cdt::eval {

/// (predicted, actual)
using Prediction = std::pair<std::string, std::string>;

/// Support-weighted mean of per-class F1 over the classes present in the
/// actual labels. Classes that are only ever predicted have zero support.
inline double weighted_f1(const std::vector<Prediction>& preds) {
    if (preds.empty()) throw Error("weighted F1 of an empty prediction list");
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0;
    };
    std::map<std::string, Counts> c;
    for (const auto& [p, a] : preds) {
        if (p == a) {
            ++c[a].tp;
        } else {
            ++c[p].fp;
            ++c[a].fn;
        }
    }
    double sum = 0;
    for (const auto& [_, k] : c) {
        const std::size_t support = k.tp + k.fn;
        if (support == 0 || k.tp == 0) continue;
        const double prec = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
        const double rec = static_cast<double>(k.tp) / static_cast<double>(support);
        sum += static_cast<double>(support) * 2 * prec * rec / (prec + rec);
    }
    return sum / static_cast<double>(preds.size());
}

struct PredictableSlice {
    std::vector<std::size_t> kept;
    double removed_fraction = 0.0;
};

/// Indices of samples whose label occurs in the training label set.
inline PredictableSlice filter_predictable(const std::vector<std::string>& labels,
                                           const std::set<std::string>& train_labels) {
    PredictableSlice s;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (train_labels.count(labels[i])) s.kept.push_back(i);
    s.removed_fraction =
        labels.empty() ? 0.0 : 1.0 - static_cast<double>(s.kept.size()) / static_cast<double>(labels.size());
    return s;
}

enum class SliceName { All, Common, Rare, PredictableAll, PredictableCommon, PredictableRare };

inline constexpr SliceName kSlices[] = {SliceName::All,           SliceName::Common,
                                        SliceName::Rare,          SliceName::PredictableAll,
                                        SliceName::PredictableCommon, SliceName::PredictableRare};

inline std::string_view to_string(SliceName s) {
    switch (s) {
        case SliceName::All: return "all";
        case SliceName::Common: return "common";
        case SliceName::Rare: return "rare";
        case SliceName::PredictableAll: return "predictable_all";
        case SliceName::PredictableCommon: return "predictable_common";
        case SliceName::PredictableRare: return "predictable_rare";
    }
    return "?";
}

struct SliceResult {
    std::size_t samples = 0;
    /// Undefined for an empty slice.
    std::optional<double> f1;
};

/// Weighted F1 on each of the six slices. Common and rare follow the label
/// space of the evaluated data itself.
inline std::map<SliceName, SliceResult> slice_metrics(const std::vector<Prediction>& preds,
                                                      const types::LabelSpace& eval_space,
                                                      const std::set<std::string>& train_labels) {
    std::map<SliceName, std::vector<Prediction>> buckets;
    for (auto s : kSlices) buckets[s];
    for (const auto& pr : preds) {
        const bool common = eval_space.is_common(pr.second);
        const bool predictable = train_labels.count(pr.second) != 0;
        buckets[SliceName::All].push_back(pr);
        buckets[common ? SliceName::Common : SliceName::Rare].push_back(pr);
        if (predictable) {
            buckets[SliceName::PredictableAll].push_back(pr);
            buckets[common ? SliceName::PredictableCommon : SliceName::PredictableRare].push_back(pr);
        }
    }
    std::map<SliceName, SliceResult> out;
    for (const auto& [name, b] : buckets) {
        SliceResult r;
        r.samples = b.size();
        if (!b.empty()) r.f1 = weighted_f1(b);
        out[name] = r;
    }
    return out;
}

}  // namespace cdt::eval
