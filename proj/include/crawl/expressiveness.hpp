#pragma once

#include <gmpxx.h>

#include <map>
#include <string>
#include <vector>

#include "crawl/graph.hpp"
#include "crawl/walks.hpp"

namespace crawl {

// Distribution over structural feature matrices of random walks: each key is
// the row-major bitstring of the identity/adjacency block ((ell+1) rows,
// 2s-1 columns for s >= 1), each value its probability. Node and edge
// embeddings are excluded; on unlabeled graphs they carry no information.
struct FeatureDistribution {
    WalkStrategy strategy = WalkStrategy::Uniform;
    int s = 0;
    int ell = 0;
    bool exact = false;
    int64_t n_samples = 0;  // sampled mode only
    std::map<std::string, mpq_class> probs;        // exact mode
    std::map<std::string, double> probs_float;     // sampled mode

    size_t support_size() const { return exact ? probs.size() : probs_float.size(); }
};

// Structural bits of one walk, row-major; the reference definition used by
// the enumeration oracle and the property tests.
std::string feature_matrix_bits(const Graph& g, const std::vector<NodeId>& walk, int s);

// Exact distribution by dynamic programming over (emitted rows, recent
// window) states with rational arithmetic. Start nodes are uniform.
// Throws ResourceError when the state count exceeds the budget.
FeatureDistribution exact_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                               int ell, int64_t state_budget = 4000000);

// Exact distribution by explicit enumeration of every walk; independent of
// the DP and used as its oracle. Throws ResourceError over budget.
FeatureDistribution enumerate_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                                   int ell, int64_t walk_budget = 4000000);

// Monte Carlo estimate with n_samples walks.
FeatureDistribution sampled_feature_distribution(const Graph& g, WalkStrategy strategy, int s,
                                                 int ell, int64_t n_samples, uint64_t seed);

// Half the l1 distance. Requires matching (strategy, s, ell).
mpq_class tv_distance_exact(const FeatureDistribution& a, const FeatureDistribution& b);
double tv_distance(const FeatureDistribution& a, const FeatureDistribution& b);

struct ThreePathReport {
    int n = 0;
    int s = 0;  // 2n-3
    int ell = 0;
    mpq_class tv_nb;
    mpq_class tv_uniform;
    bool nb_single_zero_matrix = false;  // both nb supports are one all-zero matrix
    size_t support_nb_balanced = 0;
    size_t support_nb_skewed = 0;
};

// Builds the balanced/skewed three-path pair of order 3n-1 and compares
// their feature distributions at window size 2n-3.
ThreePathReport nb_indistinguishability_check(int n, int ell, int64_t state_budget = 4000000);

// Whether the position-wise map w1[i] -> w2[i] is an isomorphism between the
// subgraphs induced on the two node sets (well defined, bijective, edges and
// non-edges preserved).
bool walklet_subgraph_oracle(const Graph& g1, const std::vector<NodeId>& w1, const Graph& g2,
                             const std::vector<NodeId>& w2);

// JSON report for the CLI: {graphs, strategy, s, ell, tv, tv_exact,
// support_sizes, mode}.
std::string distinguish_report_json(const Graph& g1, const std::string& name1, const Graph& g2,
                                    const std::string& name2, WalkStrategy strategy, int s,
                                    int ell, const std::string& mode, int64_t n_samples,
                                    uint64_t seed);

}  // namespace crawl
