// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace faithgate {

// Base of every error the library throws. The CLI maps UsageError to exit
// code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad flags, bad config keys, contract violations by the caller.
class UsageError : public Error {
public:
    using Error::Error;
};

// Unreadable files, schema violations, malformed values.
class DataError : public Error {
public:
    using Error::Error;
};

// Statistical degeneracies (zero-margin tables, undefined rates, non-finite loss).
class StatError : public Error {
public:
    using Error::Error;
};

}  // namespace faithgate
