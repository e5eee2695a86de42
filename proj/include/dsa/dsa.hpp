// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsa/config.hpp"
#include "dsa/cost.hpp"
#include "dsa/emulator.hpp"
#include "dsa/error.hpp"
#include "dsa/geometry.hpp"
#include "dsa/metrics.hpp"
#include "dsa/oracle.hpp"
#include "dsa/policy.hpp"
#include "dsa/simulator.hpp"
#include "dsa/trace.hpp"
