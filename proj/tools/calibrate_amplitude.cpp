// Sweeps the simulation curve amplitude and prints the mean AUC per method
// for scenario (a), n = 500. Used once to pick kDefaultAmplitude.
//
//   calibrate_amplitude [replicates=20] [seed=2024] [amplitude ...]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "ordpen/simlab.hpp"

int main(int argc, char** argv)
{
    const std::size_t replicates = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2024;
    std::vector<double> amplitudes;
    for (int a = 3; a < argc; ++a)
        amplitudes.push_back(std::strtod(argv[a], nullptr));
    if (amplitudes.empty())
        amplitudes = {0.3, 0.4, 0.5, 0.6, 0.7};

    const std::vector<ordpen::Method> methods{ordpen::Method::ors, ordpen::Method::orf, ordpen::Method::numeric_lasso};
    std::printf("amplitude,ORS,ORF,numeric-lasso\n");
    for (double amp : amplitudes) {
        auto scenario = ordpen::SimulationScenario::preset("a", 500);
        scenario.amplitude = amp;
        const auto res = ordpen::run_replications(scenario, methods, replicates, {}, seed);
        std::printf("%.3f,%.4f,%.4f,%.4f\n", amp, res.mean_auc(0), res.mean_auc(1), res.mean_auc(2));
        std::fflush(stdout);
    }
    return 0;
}
