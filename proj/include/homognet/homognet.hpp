#pragma once

#include "homognet/bounds.hpp"
#include "homognet/capacity.hpp"
#include "homognet/experiments.hpp"
#include "homognet/family.hpp"
#include "homognet/gauge.hpp"
#include "homognet/model.hpp"
#include "homognet/polar.hpp"
#include "homognet/serialize.hpp"
#include "homognet/teacher.hpp"
#include "homognet/trainer.hpp"
#include "homognet/zoo.hpp"
