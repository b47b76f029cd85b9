#pragma once

#include "semcom/tensor.hpp"
#include "semcom/graph.hpp"
#include "semcom/gradcheck.hpp"
#include "semcom/random.hpp"
#include "semcom/datagen.hpp"
#include "semcom/model.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/channel.hpp"
#include "semcom/losses.hpp"
#include "semcom/infotheory.hpp"
#include "semcom/pipeline.hpp"
#include "semcom/config.hpp"
#include "semcom/report.hpp"
#include "semcom/suites.hpp"
