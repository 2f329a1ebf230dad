#pragma once

#include "enermod/error.hpp"
#include "enermod/sysconfig.hpp"
#include "enermod/trace.hpp"
#include "enermod/refsim.hpp"
#include "enermod/statetrace.hpp"
#include "enermod/benchgen.hpp"
#include "enermod/campaign.hpp"
#include "enermod/modelfit.hpp"
#include "enermod/estimator.hpp"
#include "enermod/apps.hpp"
#include "enermod/pipeline.hpp"
#include "enermod/sweeps.hpp"
#include "enermod/dse.hpp"
