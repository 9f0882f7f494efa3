#pragma once

#include "mixedcurv/builtins.hpp"
#include "mixedcurv/charts.hpp"
#include "mixedcurv/cli.hpp"
#include "mixedcurv/errors.hpp"
#include "mixedcurv/expression.hpp"
#include "mixedcurv/extremal.hpp"
#include "mixedcurv/geomcore.hpp"
#include "mixedcurv/immersion.hpp"
#include "mixedcurv/linalg.hpp"
#include "mixedcurv/report.hpp"
#include "mixedcurv/scenarios.hpp"
#include "mixedcurv/structure.hpp"
#include "mixedcurv/twisted.hpp"
#include "mixedcurv/verify.hpp"
