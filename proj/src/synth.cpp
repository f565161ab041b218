// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "faithgate/csv.hpp"
#include "faithgate/random.hpp"

namespace faithgate {

namespace {

int poisson(Rng& rng, double lambda)
{
    // Knuth; lambda stays small here
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = rng.uniform();
    while (p > limit) {
        ++k;
        p *= rng.uniform();
    }
    return k;
}

}  // namespace

void write_synthetic_dataset(std::ostream& out, std::size_t rows, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "synthetic"));
    write_csv_row(out, {"id", "age", "sex", "race", "priors_count", "juv_fel_count", "charge_degree",
                        "days_in_jail", "recid"});
    for (std::size_t i = 0; i < rows; ++i) {
        const bool male = rng.bernoulli(0.8);
        const bool group_a = rng.bernoulli(0.6);
        const int age = std::clamp(static_cast<int>(std::lround(19.0 + std::abs(rng.normal()) * 15.0)), 18, 75);
        const double young = age < 25 ? 1.0 : 0.0;
        const int priors = poisson(rng, 1.5 + 2.0 * young + (group_a ? 1.0 : 0.0) + (male ? 0.5 : 0.0));
        const int juvenile = rng.bernoulli(0.1 + 0.15 * young) ? 1 + poisson(rng, 0.5) : 0;
        const bool felony = rng.bernoulli(0.55 + 0.1 * young);
        const double days = std::round(std::exp(0.5 + 1.3 * std::abs(rng.normal()) + (felony ? 0.8 : 0.0)));

        const double z = -2.1 + 0.28 * std::min(priors, 12) - 0.035 * (age - 35) + 0.45 * juvenile +
                         0.35 * (felony ? 1.0 : 0.0) + 0.25 * std::log1p(days) + 0.2 * (male ? 1.0 : 0.0) +
                         0.9 * young * (priors >= 3 ? 1.0 : -0.3) + 0.4 * rng.normal();
        const bool recid = rng.bernoulli(1.0 / (1.0 + std::exp(-z)));

        write_csv_row(out, {fmt::format("p{:05d}", i + 1), std::to_string(age), male ? "Male" : "Female",
                            group_a ? "African-American" : "Caucasian", std::to_string(priors),
                            std::to_string(juvenile), felony ? "F" : "M", fmt::format("{}", days),
                            recid ? "1" : "0"});
    }
}

}  // namespace faithgate
