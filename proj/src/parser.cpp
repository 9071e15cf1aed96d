#include "aog/parser.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <thread>

#include "aog/error.hpp"

namespace aog {

namespace {

void check_layout(const AogModel& model, const FeatureMapSet& maps) {
    if (!maps.is_normalized())
        throw Error(ErrorCode::InvalidLayout, "feature maps of " + maps.image_id + " are not normalized");
    if (maps.layers.size() < model.layer_metas.size())
        throw Error(ErrorCode::InvalidLayout, "image " + maps.image_id + " has fewer layers than the model");
    for (std::size_t l = 0; l < model.layer_metas.size(); ++l) {
        const auto& a = model.layer_metas[l];
        const auto& b = maps.layers[l].meta;
        if (a.channels != b.channels || a.height != b.height || a.width != b.width)
            throw Error(ErrorCode::InvalidLayout, "image " + maps.image_id + " layer " + std::to_string(l) +
                                                      " does not match the model geometry");
    }
}

struct WeightedVote {
    Point p;
    double weight = 0.0;  // summed 1/unit² of the votes at p
};

// Votes cluster on p̄* plus a deformation offset, so few are distinct.
std::vector<WeightedVote> distinct_votes(std::span<const Point> votes, std::span<const double> strides_px,
                                         DistanceUnit unit) {
    std::vector<WeightedVote> all;
    all.reserve(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) {
        const double len = unit_length(unit, strides_px[i]);
        all.push_back({votes[i], 1.0 / (len * len)});
    }
    std::sort(all.begin(), all.end(), [](const WeightedVote& a, const WeightedVote& b) {
        return lex_less(a.p, b.p) || (a.p == b.p && a.weight < b.weight);
    });
    std::vector<WeightedVote> out;
    for (const auto& v : all) {
        if (!out.empty() && out.back().p == v.p) {
            out.back().weight += v.weight;
        } else {
            out.push_back(v);
        }
    }
    return out;
}

// Inlier sets of the truncated objective are constant on the faces of the
// arrangement of radius-d circles around the votes; the optimum is the mean
// of its own inlier set. Every face is read off at a vote or at a pairwise
// circle intersection.
std::vector<Point> center_candidates(std::span<const WeightedVote> votes, double d) {
    const std::size_t n = votes.size();
    const double d2 = d * d;
    std::vector<Point> out;
    for (const auto& v : votes) out.push_back(v.p);

    auto push_mean = [&](const std::vector<std::size_t>& members) {
        if (members.empty()) return;
        Point s;
        double w = 0.0;
        for (std::size_t k : members) {
            s = s + votes[k].weight * votes[k].p;
            w += votes[k].weight;
        }
        out.push_back((1.0 / w) * s);
    };

    std::vector<std::size_t> members(n);
    for (std::size_t k = 0; k < n; ++k) members[k] = k;
    push_mean(members);

    for (std::size_t i = 0; i < n; ++i) {
        members.clear();
        for (std::size_t k = 0; k < n; ++k)
            if (squared_norm(votes[k].p - votes[i].p) < d2) members.push_back(k);
        push_mean(members);
    }

    std::vector<std::size_t> base;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point delta = votes[j].p - votes[i].p;
            const double len = norm(delta);
            if (len <= 0.0 || len >= 2.0 * d) continue;
            const double half = 0.5 * len;
            const double h = std::sqrt(std::max(d2 - half * half, 0.0));
            const Point mid = votes[i].p + 0.5 * delta;
            const Point perp{-delta.y / len, delta.x / len};
            for (double sign : {1.0, -1.0}) {
                const Point x = mid + (sign * h) * perp;
                base.clear();
                for (std::size_t k = 0; k < n; ++k)
                    if (k != i && k != j && squared_norm(votes[k].p - x) < d2) base.push_back(k);
                for (int extra = 0; extra < 4; ++extra) {
                    members = base;
                    if (extra & 1) members.push_back(i);
                    if (extra & 2) members.push_back(j);
                    push_mean(members);
                }
            }
        }
    }
    return out;
}

}  // namespace

const TemplateParse& ParseResult::chosen() const {
    for (const auto& t : templates)
        if (t.template_id == chosen_template_id) return t;
    throw Error(ErrorCode::UnknownTemplate, "parse result has no entry for its chosen template");
}

TerminalScore score_terminal(double x, Point unit_pos, Point ideal_center,
                             std::span<const NeighborPlacement> neighbors, double stride_px,
                             const ScoreWeights& weights) {
    TerminalScore s;
    s.rsp = x > 0.0 ? weights.rsp * x : weights.rsp * weights.s_none;

    const double loc_div = unit_length(weights.loc_unit, stride_px);
    s.loc = -weights.loc * squared_norm((1.0 / loc_div) * (unit_pos - ideal_center));

    if (!neighbors.empty()) {
        const double pair_div = unit_length(weights.pair_unit, stride_px);
        double sum = 0.0;
        for (const auto& nb : neighbors) {
            const Point actual = unit_pos - nb.assigned_center;
            const Point ideal = ideal_center - nb.ideal_center;
            sum += norm((1.0 / pair_div) * (actual - ideal));
        }
        s.pair = -weights.pair * (sum / static_cast<double>(neighbors.size()));
    }
    return s;
}

UnitAssignment infer_latent_pattern(const LatentPattern& pattern, const FeatureMapSet& maps,
                                    std::span<const NeighborPlacement> neighbors, const ScoreWeights& weights) {
    const LayerMaps& layer = maps.layers.at(pattern.layer);
    const LayerMeta& meta = layer.meta;
    const CellRange range = deformation_range(pattern, meta);
    if (range.empty()) throw Error(ErrorCode::EmptyDeformationRange, "pattern " + std::to_string(pattern.id));

    UnitAssignment best;
    bool found = false;
    for (int r = range.row0; r <= range.row1; ++r) {
        for (int c = range.col0; c <= range.col1; ++c) {
            const Point pos = unit_to_image_region(meta, r, c).center;
            const TerminalScore ts = score_terminal(layer.x_at(pattern.channel, r, c), pos, pattern.ideal_center,
                                                    neighbors, meta.stride_px, weights);
            const double total = ts.rsp + ts.loc + ts.pair;
            if (!found || total > best.score) {
                found = true;
                best.pattern_id = pattern.id;
                best.unit = {pattern.layer, pattern.channel, r, c};
                best.unit_center = pos;
                best.stride_px = meta.stride_px;
                best.score = total;
                best.parts = ts;
            }
        }
    }
    return best;
}

double inference_compatibility(Point vote, Point center, double stride_px, const ScoreWeights& weights) {
    const double len = unit_length(weights.inf_unit, stride_px);
    return -weights.inf * std::min(squared_norm(vote - center), weights.d_px * weights.d_px) / (len * len);
}

TemplatePlacement best_vote_center(std::span<const Point> votes, std::span<const double> strides_px,
                                   const ScoreWeights& weights) {
    if (votes.empty()) throw Error(ErrorCode::NoPatterns, "no votes to place a template");
    if (strides_px.size() != votes.size()) throw Error(ErrorCode::LengthMismatch, "one stride per vote");
    const std::vector<WeightedVote> distinct = distinct_votes(votes, strides_px, weights.inf_unit);
    const double d2 = weights.d_px * weights.d_px;
    TemplatePlacement best;
    bool found = false;
    for (Point cand : center_candidates(distinct, weights.d_px)) {
        double sum = 0.0;
        for (const auto& v : distinct) sum += -weights.inf * v.weight * std::min(squared_norm(v.p - cand), d2);
        if (!found || sum > best.score || (sum == best.score && lex_less(cand, best.center))) {
            found = true;
            best = {cand, sum};
        }
    }
    return best;
}

TemplatePlacement infer_part_template(const PartTemplate& tmpl, std::span<const UnitAssignment> assignments,
                                      const ScoreWeights& weights) {
    if (tmpl.patterns.empty()) throw Error(ErrorCode::NoPatterns, "template " + std::to_string(tmpl.id));
    if (assignments.size() != tmpl.patterns.size())
        throw Error(ErrorCode::LengthMismatch, "assignments do not cover template " + std::to_string(tmpl.id));

    std::vector<Point> votes;
    std::vector<double> strides;
    votes.reserve(assignments.size());
    strides.reserve(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        votes.push_back(assignments[i].unit_center + tmpl.patterns[i].displacement);
        strides.push_back(assignments[i].stride_px);
    }

    TemplatePlacement placement = best_vote_center(votes, strides, weights);
    double total = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        total += assignments[i].score + inference_compatibility(votes[i], placement.center, strides[i], weights);
    placement.score = total;
    return placement;
}

TemplateParse parse_template(const PartTemplate& tmpl, const FeatureMapSet& maps, const ScoreWeights& weights) {
    if (tmpl.patterns.empty()) throw Error(ErrorCode::NoPatterns, "template " + std::to_string(tmpl.id));
    assert(tmpl.neighbors.size() == tmpl.patterns.size());

    std::vector<std::size_t> order(tmpl.patterns.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tmpl.patterns[a].layer > tmpl.patterns[b].layer;
    });

    TemplateParse out;
    out.template_id = tmpl.id;
    out.assignments.resize(tmpl.patterns.size());
    std::vector<NeighborPlacement> neighbors;
    for (std::size_t i : order) {
        neighbors.clear();
        for (std::size_t j : tmpl.neighbors[i])
            neighbors.push_back({tmpl.patterns[j].ideal_center, out.assignments[j].unit_center});
        out.assignments[i] = infer_latent_pattern(tmpl.patterns[i], maps, neighbors, weights);
    }
    const TemplatePlacement placement = infer_part_template(tmpl, out.assignments, weights);
    out.center = placement.center;
    out.score = placement.score;
    return out;
}

ParseResult parse_image(const AogModel& model, const FeatureMapSet& maps) {
    if (model.templates.empty()) throw Error(ErrorCode::EmptyModel, "model has no part templates");
    check_layout(model, maps);

    ParseResult result;
    result.image_id = maps.image_id;
    const TemplateParse* best = nullptr;
    for (const auto& tmpl : model.templates) result.templates.push_back(parse_template(tmpl, maps, model.weights));
    for (const auto& tp : result.templates) {
        if (!best || tp.score > best->score || (tp.score == best->score && tp.template_id < best->template_id))
            best = &tp;
    }
    const PartTemplate* chosen = model.find_template(best->template_id);
    result.chosen_template_id = best->template_id;
    result.s_top = best->score;
    result.p_top = best->center;
    result.region = {best->center.x, best->center.y, chosen->scale.w, chosen->scale.h};
    return result;
}

std::vector<ParseResult> parse_corpus(const AogModel& model, std::span<const FeatureMapSet* const> maps) {
    std::vector<ParseResult> out(maps.size());
    const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), 8);
    if (workers <= 1 || maps.size() < 8) {
        for (std::size_t i = 0; i < maps.size(); ++i) out[i] = parse_image(model, *maps[i]);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < maps.size(); i += workers) out[i] = parse_image(model, *maps[i]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<ParseResult> parse_corpus(const AogModel& model, std::span<const FeatureMapSet> maps) {
    std::vector<const FeatureMapSet*> ptrs;
    ptrs.reserve(maps.size());
    for (const auto& m : maps) ptrs.push_back(&m);
    return parse_corpus(model, std::span<const FeatureMapSet* const>(ptrs));
}

}  // namespace aog
