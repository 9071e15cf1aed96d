#pragma once

#include <span>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/parser.hpp"

namespace aog {

/// Activation statistics of the units a parse selected on one layer, against
/// every unit of that layer. Activations are the normalized X values.
struct LayerActivationStats {
    int layer = 0;
    std::size_t inferred_units = 0;
    double energy_ratio = 0.0;        // Σ inferred / Σ all
    double relative_magnitude = 0.0;  // mean inferred / mean all
    double activation_ratio = 0.0;    // fraction of inferred units above the layer mean
};

/// Statistics for `units` (duplicates count once) on `layer` of `maps`.
/// Throws EmptyLayer when `units` is empty.
LayerActivationStats layer_activation_stats(const FeatureMapSet& maps, int layer, std::span<const UnitRef> units);

/// One entry per layer that the chosen template of `parse` selected units on,
/// in increasing layer order.
std::vector<LayerActivationStats> pattern_activation_stats(const ParseResult& parse, const FeatureMapSet& maps);

}  // namespace aog
