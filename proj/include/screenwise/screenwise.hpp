#pragma once

#include "screenwise/error.hpp"
#include "screenwise/core.hpp"
#include "screenwise/bounds.hpp"
#include "screenwise/risk.hpp"
#include "screenwise/clustering.hpp"
#include "screenwise/tree.hpp"
#include "screenwise/policy.hpp"
#include "screenwise/session.hpp"
#include "screenwise/synth.hpp"
#include "screenwise/eval.hpp"
