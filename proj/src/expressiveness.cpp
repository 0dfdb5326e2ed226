#include "crawl/expressiveness.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include <json.hpp>

#include "crawl/error.hpp"
#include "crawl/rng.hpp"

namespace crawl {

namespace {

inline int row_width(int s) { return s >= 1 ? 2 * s - 1 : 0; }

// Bits for the row of node `cur` whose predecessors (most recent first) are
// given in `recent`: identity against depths 1..s, adjacency against depths
// 2..s. Missing predecessors contribute 0.
void emit_row(const Graph& g, NodeId cur, const std::vector<NodeId>& recent, int s,
              std::string& out) {
    for (int j = 1; j <= s; ++j) {
        bool bit = j <= static_cast<int>(recent.size()) && recent[j - 1] == cur;
        out.push_back(bit ? '1' : '0');
    }
    for (int j = 2; j <= s; ++j) {
        bool bit = j <= static_cast<int>(recent.size()) && g.is_edge(cur, recent[j - 1]);
        out.push_back(bit ? '1' : '0');
    }
}

}  // namespace

std::string feature_matrix_bits(const Graph& g, const std::vector<NodeId>& walk, int s) {
    if (s < 0) throw InvalidArgument("window size must be nonnegative");
    std::string bits;
    bits.reserve(walk.size() * row_width(s));
    for (size_t i = 0; i < walk.size(); ++i) {
        for (int j = 1; j <= s; ++j) {
            bool bit = static_cast<int>(i) - j >= 0 && walk[i] == walk[i - j];
            bits.push_back(bit ? '1' : '0');
        }
        for (int j = 1; j <= s - 1; ++j) {
            bool bit = static_cast<int>(i) - j >= 1 && g.is_edge(walk[i], walk[i - j - 1]);
            bits.push_back(bit ? '1' : '0');
        }
    }
    return bits;
}

FeatureDistribution exact_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                               int ell, int64_t state_budget) {
    if (s < 0) throw InvalidArgument("window size must be nonnegative");
    if (ell < 1) throw InvalidArgument("walk length must be >= 1");

    // State: (emitted bit rows, most recent nodes newest-first). The window
    // keeps the last max(s, 2) nodes: s suffice to emit the next row, two to
    // apply the non-backtracking rule.
    const size_t window = static_cast<size_t>(std::max(s, 2));
    using State = std::pair<std::string, std::vector<NodeId>>;
    std::map<State, mpq_class> states;

    const mpq_class start_p(1, g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        std::string bits;
        emit_row(g, v, {}, s, bits);
        states[{std::move(bits), {v}}] += start_p;
    }

    for (int t = 0; t < ell; ++t) {
        std::map<State, mpq_class> next;
        for (const auto& [state, p] : states) {
            const auto& [bits, recent] = state;
            const NodeId cur = recent.front();
            const auto& nb = g.neighbors(cur);
            const bool free_step =
                strategy == WalkStrategy::Uniform || t == 0 || nb.size() == 1;
            const NodeId prev = recent.size() >= 2 ? recent[1] : -1;
            int choices = 0;
            for (NodeId u : nb)
                if (free_step || u != prev) ++choices;
            const mpq_class step_p = p / choices;
            for (NodeId u : nb) {
                if (!free_step && u == prev) continue;
                std::string nbits = bits;
                emit_row(g, u, recent, s, nbits);
                std::vector<NodeId> nrecent;
                nrecent.reserve(window);
                nrecent.push_back(u);
                for (size_t i = 0; i + 1 < window && i < recent.size(); ++i)
                    nrecent.push_back(recent[i]);
                next[{std::move(nbits), std::move(nrecent)}] += step_p;
            }
            if (static_cast<int64_t>(next.size()) > state_budget)
                throw ResourceError(
                    "exact distribution state space over budget; use sampled mode");
        }
        states = std::move(next);
    }

    FeatureDistribution dist;
    dist.strategy = strategy;
    dist.s = s;
    dist.ell = ell;
    dist.exact = true;
    for (const auto& [state, p] : states) dist.probs[state.first] += p;
    mpq_class total(0);
    for (const auto& [k, p] : dist.probs) total += p;
    if (total != 1) throw NumericalError("exact distribution does not sum to one");
    return dist;
}

FeatureDistribution enumerate_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                                   int ell, int64_t walk_budget) {
    if (s < 0) throw InvalidArgument("window size must be nonnegative");
    if (ell < 1) throw InvalidArgument("walk length must be >= 1");

    FeatureDistribution dist;
    dist.strategy = strategy;
    dist.s = s;
    dist.ell = ell;
    dist.exact = true;

    int64_t visited = 0;
    std::vector<NodeId> walk;
    walk.reserve(ell + 1);

    // Depth-first over all walks; probability is the product of the choice
    // counts along the way.
    std::function<void(mpq_class)> dfs = [&](mpq_class p) {
        if (static_cast<int>(walk.size()) == ell + 1) {
            if (++visited > walk_budget)
                throw ResourceError("walk enumeration over budget; use sampled mode");
            dist.probs[feature_matrix_bits(g, walk, s)] += p;
            return;
        }
        const NodeId cur = walk.back();
        const auto& nb = g.neighbors(cur);
        const bool free_step = strategy == WalkStrategy::Uniform || walk.size() == 1 ||
                               nb.size() == 1;
        const NodeId prev = walk.size() >= 2 ? walk[walk.size() - 2] : -1;
        int choices = 0;
        for (NodeId u : nb)
            if (free_step || u != prev) ++choices;
        const mpq_class step_p = p / choices;
        for (NodeId u : nb) {
            if (!free_step && u == prev) continue;
            walk.push_back(u);
            dfs(step_p);
            walk.pop_back();
        }
    };

    const mpq_class start_p(1, g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        walk.assign(1, v);
        dfs(start_p);
    }
    mpq_class total(0);
    for (const auto& [k, p] : dist.probs) total += p;
    if (total != 1) throw NumericalError("enumeration distribution does not sum to one");
    return dist;
}

FeatureDistribution sampled_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                                 int ell, int64_t n_samples, uint64_t seed) {
    if (n_samples < 1) throw InvalidArgument("need at least one sample");
    FeatureDistribution dist;
    dist.strategy = strategy;
    dist.s = s;
    dist.ell = ell;
    dist.exact = false;
    dist.n_samples = n_samples;

    RngStream start_rng(seed, RngStream::stream_id("distribution_starts"));
    std::map<std::string, int64_t> counts;
    constexpr int64_t kBlock = 8192;
    std::vector<NodeId> starts;
    for (int64_t done = 0; done < n_samples; done += kBlock) {
        const int64_t take = std::min(kBlock, n_samples - done);
        starts.clear();
        for (int64_t i = 0; i < take; ++i)
            starts.push_back(static_cast<NodeId>(start_rng.uniform_int(g.n_nodes())));
        WalkSet ws = sample_walks_from(g, strategy, starts, ell,
                                  RngStream::stream_id("distribution_walks", seed, done));
        for (int w = 0; w < ws.m; ++w) {
            std::vector<NodeId> walk(ws.row(w), ws.row(w) + ws.row_len());
            ++counts[feature_matrix_bits(g, walk, s)];
        }
    }
    for (const auto& [k, c] : counts)
        dist.probs_float[k] = static_cast<double>(c) / static_cast<double>(n_samples);
    return dist;
}

namespace {

void require_comparable(const FeatureDistribution& a, const FeatureDistribution& b) {
    if (a.s != b.s || a.ell != b.ell || a.strategy != b.strategy)
        throw InvalidArgument("distributions have mismatched (strategy, s, ell) parameters");
}

}  // namespace

mpq_class tv_distance_exact(const FeatureDistribution& a, const FeatureDistribution& b) {
    require_comparable(a, b);
    if (!a.exact || !b.exact)
        throw InvalidArgument("exact total variation needs exact distributions");
    mpq_class acc(0);
    auto ia = a.probs.begin();
    auto ib = b.probs.begin();
    while (ia != a.probs.end() || ib != b.probs.end()) {
        if (ib == b.probs.end() || (ia != a.probs.end() && ia->first < ib->first)) {
            acc += ia->second;
            ++ia;
        } else if (ia == a.probs.end() || ib->first < ia->first) {
            acc += ib->second;
            ++ib;
        } else {
            acc += abs(mpq_class(ia->second - ib->second));
            ++ia;
            ++ib;
        }
    }
    return mpq_class(acc / 2);
}

double tv_distance(const FeatureDistribution& a, const FeatureDistribution& b) {
    require_comparable(a, b);
    if (a.exact && b.exact) return mpq_class(tv_distance_exact(a, b)).get_d();
    auto values = [](const FeatureDistribution& d, const std::string& key) {
        if (d.exact) {
            auto it = d.probs.find(key);
            return it == d.probs.end() ? 0.0 : mpq_class(it->second).get_d();
        }
        auto it = d.probs_float.find(key);
        return it == d.probs_float.end() ? 0.0 : it->second;
    };
    std::vector<std::string> keys;
    if (a.exact)
        for (const auto& [k, p] : a.probs) keys.push_back(k);
    else
        for (const auto& [k, p] : a.probs_float) keys.push_back(k);
    if (b.exact)
        for (const auto& [k, p] : b.probs) keys.push_back(k);
    else
        for (const auto& [k, p] : b.probs_float) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    double acc = 0.0;
    for (const auto& k : keys) acc += std::abs(values(a, k) - values(b, k));
    return acc / 2.0;
}

ThreePathReport nb_indistinguishability_check(int n, int ell, int64_t state_budget) {
    if (n < 2) throw InvalidArgument("three-path gadget needs n >= 2");
    ThreePathReport report;
    report.n = n;
    report.s = 2 * n - 3;
    report.ell = ell;
    Graph balanced = make_three_paths(n, true);
    Graph skewed = make_three_paths(n, false);

    auto d_nb_b = exact_feature_distribution(balanced, WalkStrategy::NonBacktracking, report.s,
                                             ell, state_budget);
    auto d_nb_s = exact_feature_distribution(skewed, WalkStrategy::NonBacktracking, report.s,
                                             ell, state_budget);
    report.tv_nb = tv_distance_exact(d_nb_b, d_nb_s);
    report.support_nb_balanced = d_nb_b.support_size();
    report.support_nb_skewed = d_nb_s.support_size();

    const std::string zero((ell + 1) * row_width(report.s), '0');
    report.nb_single_zero_matrix = d_nb_b.probs.size() == 1 && d_nb_s.probs.size() == 1 &&
                                   d_nb_b.probs.count(zero) == 1 &&
                                   d_nb_s.probs.count(zero) == 1;

    auto d_un_b =
        exact_feature_distribution(balanced, WalkStrategy::Uniform, report.s, ell, state_budget);
    auto d_un_s =
        exact_feature_distribution(skewed, WalkStrategy::Uniform, report.s, ell, state_budget);
    report.tv_uniform = tv_distance_exact(d_un_b, d_un_s);
    return report;
}

bool walklet_subgraph_oracle(const Graph& g1, const std::vector<NodeId>& w1, const Graph& g2,
                             const std::vector<NodeId>& w2) {
    if (w1.size() != w2.size()) return false;
    const size_t n = w1.size();
    for (size_t a = 0; a < n; ++a) {
        for (size_t b = a + 1; b < n; ++b) {
            if ((w1[a] == w1[b]) != (w2[a] == w2[b])) return false;  // not well defined/injective
            if (g1.is_edge(w1[a], w1[b]) != g2.is_edge(w2[a], w2[b])) return false;
        }
    }
    return true;
}

std::string distinguish_report_json(const Graph& g1, const std::string& name1, const Graph& g2,
                                    const std::string& name2, WalkStrategy strategy, int s,
                                    int ell, const std::string& mode, int64_t n_samples,
                                    uint64_t seed) {
    nlohmann::json j;
    j["graphs"] = {name1, name2};
    j["strategy"] = to_string(strategy);
    j["s"] = s;
    j["ell"] = ell;
    j["mode"] = mode;
    if (mode == "exact") {
        auto d1 = exact_feature_distribution(g1, strategy, s, ell);
        auto d2 = exact_feature_distribution(g2, strategy, s, ell);
        mpq_class tv = tv_distance_exact(d1, d2);
        j["tv"] = tv.get_d();
        j["tv_exact"] = tv.get_str();
        j["support_sizes"] = {d1.support_size(), d2.support_size()};
    } else if (mode == "sampled") {
        auto d1 = sampled_feature_distribution(g1, strategy, s, ell, n_samples, seed);
        auto d2 = sampled_feature_distribution(g2, strategy, s, ell, n_samples ^ 1, seed);
        j["tv"] = tv_distance(d1, d2);
        j["n_samples"] = n_samples;
        j["support_sizes"] = {d1.support_size(), d2.support_size()};
    } else {
        throw InvalidArgument("unknown mode: " + mode);
    }
    return j.dump(2);
}

}  // namespace crawl
