#pragma once

#include <algorithm>

#include "sclmetric/errors.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

template <class T>
std::vector<BatchOf<T>> make_batches(std::vector<T> genuine, std::vector<T> imposter,
                                     int batch_size, std::uint64_t seed) {
    if (batch_size < 2) throw ConfigError("batch size must be >= 2");
    Rng rng(seed);
    std::shuffle(genuine.begin(), genuine.end(), rng);
    std::shuffle(imposter.begin(), imposter.end(), rng);

    const auto size = static_cast<std::size_t>(batch_size);
    std::vector<BatchOf<T>> batches;
    std::size_t gi = 0, ii = 0;
    while (gi < genuine.size() || ii < imposter.size()) {
        const std::size_t rem_g = genuine.size() - gi;
        const std::size_t rem_i = imposter.size() - ii;
        std::size_t take_i = std::min(rem_i, size / 2);
        const std::size_t take_g = std::min(rem_g, size - take_i);
        take_i = std::min(rem_i, size - take_g);

        BatchOf<T> b;
        b.genuine.assign(genuine.begin() + static_cast<std::ptrdiff_t>(gi),
                         genuine.begin() + static_cast<std::ptrdiff_t>(gi + take_g));
        b.imposter.assign(imposter.begin() + static_cast<std::ptrdiff_t>(ii),
                          imposter.begin() + static_cast<std::ptrdiff_t>(ii + take_i));
        gi += take_g;
        ii += take_i;
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace sclmetric
