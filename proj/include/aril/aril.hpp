#pragma once

// Umbrella header.

#include "aril/errors.hpp"
#include "aril/numerics.hpp"
#include "aril/environments.hpp"
#include "aril/representation.hpp"
#include "aril/adversary.hpp"
#include "aril/successor.hpp"
#include "aril/data.hpp"
#include "aril/query.hpp"
#include "aril/config.hpp"
#include "aril/agent.hpp"
#include "aril/gradcheck.hpp"
#include "aril/harness.hpp"
