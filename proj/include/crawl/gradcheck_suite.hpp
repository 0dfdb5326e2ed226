#pragma once

#include <string>
#include <vector>

namespace crawl {

struct AuditResult {
    std::string name;
    double max_rel_err = 0.0;
    int64_t n_coords = 0;
    bool pass = false;
};

// Central finite differences against the tape gradients for every
// differentiable kernel plus a composed two-layer model (walks frozen).
// Deterministic; uses fixed seeds.
std::vector<AuditResult> run_gradient_audit(double tol = 1e-4);

}  // namespace crawl
