#pragma once

#include "randsemi/scalar.hpp"
#include "randsemi/vector.hpp"
#include "randsemi/operator.hpp"
#include "randsemi/rng.hpp"
#include "randsemi/stats.hpp"
#include "randsemi/opnorm.hpp"
#include "randsemi/matexp.hpp"
#include "randsemi/serialize.hpp"
#include "randsemi/ensembles.hpp"
#include "randsemi/lln.hpp"
#include "randsemi/conjugation.hpp"
#include "randsemi/closed_examples.hpp"
#include "randsemi/config.hpp"
#include "randsemi/report.hpp"
#include "randsemi/runner.hpp"
