// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_FFP8_HPP
#define FFP8_FFP8_HPP

#include "ffp8/analysis.hpp"
#include "ffp8/assignment.hpp"
#include "ffp8/bundle.hpp"
#include "ffp8/error.hpp"
#include "ffp8/format.hpp"
#include "ffp8/refnet.hpp"
#include "ffp8/report.hpp"
#include "ffp8/search.hpp"
#include "ffp8/tensor.hpp"

#endif  // FFP8_FFP8_HPP
