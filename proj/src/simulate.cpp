#include "selfcal/simulate.hpp"

#include <stdexcept>

#include "selfcal/probability.hpp"
#include "selfcal/rng.hpp"

namespace selfcal {

double SimSpec::nu() const {
    return config.unknown_nu() ? mock_true.nu : config.known_nu();
}

void SimSpec::validate() const {
    config.validate();
    if (!is_physical(mock_true.state, config.tol.tol_psd))
        throw std::invalid_argument("SimSpec: mock-true state is not physical");
    if (!(nu() >= 0)) throw std::invalid_argument("SimSpec: nu must be nonnegative");
    if (repetitions < 1) throw std::invalid_argument("SimSpec: repetitions must be >= 1");
}

CountRecord simulate_counts(const SimSpec& spec, int repetition) {
    spec.validate();
    const double nu = spec.nu();
    CountRecord rec;
    if (nu == 0) return rec;
    const OutcomeTable t = outcome_probabilities(spec.mock_true, spec.config.tol.tol_psd);
    auto rng = make_rng(spec.seed, static_cast<std::uint64_t>(repetition));
    for (int k = 0; k < 24; ++k) {
        const double mean = nu * t.p[static_cast<std::size_t>(k)];
        if (mean <= 0) continue;
        std::poisson_distribution<std::int64_t> pois(mean);
        rec.n[static_cast<std::size_t>(k)] = pois(rng);
    }
    return rec;
}

}  // namespace selfcal
