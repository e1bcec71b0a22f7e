// Prints the radial core profile and its Pohozaev diagnostics for a few
// exponents.

#include <cstdio>

#include "vortexlab/profile.hpp"

int main() {
    for (double p : {1.5, 2.0, 3.0, 5.0}) {
        const auto sol = vortexlab::solve_profile(p);
        std::printf("p = %.2f: phi(0) = %.8f, phi'(1) = %.8f, Ip = %.8f, Ip1 = %.8f\n", p,
                    sol.phi0, sol.phi_prime_1, sol.I_p, sol.I_p1);
        std::printf("          pohozaev residuals: %.2e, %.2e\n", sol.pohozaev_res_p,
                    sol.pohozaev_res_p1);
    }
    return 0;
}
