// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only reference implementations. They share no code with the library:
// different algorithms, extended precision, no Eigen.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "faithgate/random.hpp"

namespace oracle {

// Chi-squared survival function by the closed forms for integer dof:
// even k: exp(-x/2) * sum_{j<k/2} (x/2)^j / j!
// odd k:  erfc(sqrt(x/2)) + exp(-x/2) * sum_{j=1}^{(k-1)/2} (x/2)^(j-1/2) / Gamma(j+1/2)
inline double chi2_sf(double x, int k)
{
    if (x <= 0.0) {
        return 1.0;
    }
    const long double h = static_cast<long double>(x) / 2.0L;
    long double sum = 0.0L;
    if (k % 2 == 0) {
        long double term = 1.0L;
        for (int j = 0; j < k / 2; ++j) {
            if (j > 0) {
                term *= h / j;
            }
            sum += term;
        }
        return static_cast<double>(std::exp(-h) * sum);
    }
    // Gamma(3/2) = sqrt(pi)/2, Gamma(j+1/2) = (j-1/2) Gamma(j-1/2)
    long double term = std::sqrt(h) / (std::sqrt(3.14159265358979323846264338327950288L) / 2.0L);
    for (int j = 1; j <= (k - 1) / 2; ++j) {
        if (j > 1) {
            term *= h / (j - 0.5L);
        }
        sum += term;
    }
    return static_cast<double>(std::erfc(std::sqrt(h)) + std::exp(-h) * sum);
}

struct Chi2 {
    double statistic = 0.0;
    int dof = 0;
    double p = 1.0;
};

// Pearson test with the 2x2 continuity correction of the common scientific
// Python routine: |O - E| is reduced by min(0.5, |O - E|).
inline Chi2 chi2(const std::vector<std::vector<long long>>& t, bool yates)
{
    const std::size_t r = t.size();
    const std::size_t c = t[0].size();
    std::vector<long double> rs(r, 0.0L), cs(c, 0.0L);
    long double n = 0.0L;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            rs[i] += t[i][j];
            cs[j] += t[i][j];
            n += t[i][j];
        }
    }
    const bool correct = yates && r == 2 && c == 2;
    long double stat = 0.0L;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const long double e = rs[i] * cs[j] / n;
            long double d = std::fabs(t[i][j] - e);
            if (correct) {
                d -= std::min(0.5L, d);
            }
            stat += d * d / e;
        }
    }
    Chi2 out;
    out.statistic = static_cast<double>(stat);
    out.dof = static_cast<int>((r - 1) * (c - 1));
    out.p = chi2_sf(out.statistic, out.dof);
    return out;
}

// Half the sum over ordered pairs; exact for dyadic inputs.
inline double bias(const std::vector<double>& sens, const std::vector<double>& spec)
{
    double total = 0.0;
    for (std::size_t i = 0; i < sens.size(); ++i) {
        for (std::size_t j = 0; j < sens.size(); ++j) {
            total += std::fabs(sens[i] - sens[j]) + std::fabs(spec[i] - spec[j]);
        }
    }
    return total / 2.0;
}

// Welford's streaming mean and sample standard deviation.
inline std::pair<double, double> welford(const std::vector<double>& v)
{
    long double mean = 0.0L;
    long double m2 = 0.0L;
    std::size_t n = 0;
    for (double x : v) {
        ++n;
        const long double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(m2 / (n - 1)))};
}

}  // namespace oracle

namespace testutil {

// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("faithgate_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::vector<std::uint8_t> random_bits(faithgate::Rng& rng, std::size_t n, double p = 0.5)
{
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) {
        b = rng.bernoulli(p) ? 1 : 0;
    }
    return v;
}

}  // namespace testutil
