// Locates the symmetric two-vortex critical point of the Kirchhoff-Routh
// function on the unit disk and prints the spectrum of the Hessian.

#include <cstdio>

#include "vortexlab/routh.hpp"

using namespace vortexlab;

int main() {
    const DomainDescriptor disk = make_domain(DomainKind::disk, {1.0}, 64);
    const PotentialEvaluator eval = PotentialEvaluator::analytic_disk(disk);
    const BackgroundFlow flow = solve_background(eval, {});

    VortexConfig cfg;
    cfg.kappa = {1.0, 1.0};
    cfg.z = {{0.5, 0.0}, {-0.5, 0.0}};

    const CriticalPoint cp = find_critical(eval, flow, cfg, cfg.z);
    std::printf("critical pair: (%.9f, %.9f), (%.9f, %.9f)\n", cp.z[0].x, cp.z[0].y, cp.z[1].x,
                cp.z[1].y);
    std::printf("|grad W| = %.3e after %d iterations\n", cp.grad_norm, cp.iterations);
    std::printf("Hessian eigenvalues:");
    for (double e : cp.hessian_eigs) std::printf(" %.6f", e);
    std::printf("\nclassified %s (transversal: %s, orbit mode: %s)\n",
                critical_kind_name(cp.kind), critical_kind_name(cp.transversal_kind),
                cp.orbit_degenerate ? "yes" : "no");
    return 0;
}
