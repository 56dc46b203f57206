#pragma once

#include "carl/error.hpp"
#include "carl/stability.hpp"
#include "carl/params.hpp"
#include "carl/scaling.hpp"
#include "carl/fpmodes.hpp"
#include "carl/steady.hpp"
#include "carl/ensemble.hpp"
#include "carl/csv.hpp"
#include "carl/config.hpp"
