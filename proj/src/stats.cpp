#include "aog/stats.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "aog/error.hpp"

namespace aog {

LayerActivationStats layer_activation_stats(const FeatureMapSet& maps, int layer, std::span<const UnitRef> units) {
    if (units.empty()) throw Error(ErrorCode::EmptyLayer, "no inferred units on layer " + std::to_string(layer));
    if (!maps.is_normalized()) throw Error(ErrorCode::InvalidLayout, "stats need normalized maps");
    const LayerMaps& l = maps.layers.at(layer);

    double all_sum = 0.0;
    for (double x : l.normalized) all_sum += std::max(x, 0.0);
    const double all_mean = all_sum / static_cast<double>(l.normalized.size());

    std::set<std::tuple<int, int, int>> unique;
    for (const auto& u : units) {
        if (u.layer != layer) throw Error(ErrorCode::InvalidLayout, "unit belongs to another layer");
        unique.emplace(u.channel, u.row, u.col);
    }
    double sel_sum = 0.0;
    std::size_t above = 0;
    for (const auto& [c, r, col] : unique) {
        const double x = std::max(l.x_at(c, r, col), 0.0);
        sel_sum += x;
        if (x > all_mean) ++above;
    }
    const double n = static_cast<double>(unique.size());

    LayerActivationStats s;
    s.layer = layer;
    s.inferred_units = unique.size();
    s.energy_ratio = all_sum > 0.0 ? sel_sum / all_sum : 0.0;
    s.relative_magnitude = all_mean > 0.0 ? (sel_sum / n) / all_mean : 0.0;
    s.activation_ratio = static_cast<double>(above) / n;
    return s;
}

std::vector<LayerActivationStats> pattern_activation_stats(const ParseResult& parse, const FeatureMapSet& maps) {
    std::map<int, std::vector<UnitRef>> by_layer;
    for (const auto& a : parse.chosen().assignments) by_layer[a.unit.layer].push_back(a.unit);
    std::vector<LayerActivationStats> out;
    for (const auto& [layer, units] : by_layer) out.push_back(layer_activation_stats(maps, layer, units));
    return out;
}

}  // namespace aog
