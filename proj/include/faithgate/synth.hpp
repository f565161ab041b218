// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

namespace faithgate {

// Recidivism-style tabular data: demographic columns (age, sex, race),
// record features and a binary outcome `recid` drawn from a logistic model
// with an interaction term. Identical output for identical arguments.
void write_synthetic_dataset(std::ostream& out, std::size_t rows, std::uint64_t seed);

}  // namespace faithgate
