#pragma once

#include "foar/cli/cli.hpp"            // IWYU pragma: export
#include "foar/core/checkpoint.hpp"    // IWYU pragma: export
#include "foar/core/grad_check.hpp"    // IWYU pragma: export
#include "foar/core/nn.hpp"            // IWYU pragma: export
#include "foar/core/optim.hpp"         // IWYU pragma: export
#include "foar/data/dataset.hpp"       // IWYU pragma: export
#include "foar/eval/harness.hpp"       // IWYU pragma: export
#include "foar/policy/train.hpp"       // IWYU pragma: export
#include "foar/runtime/control_loop.hpp"  // IWYU pragma: export
#include "foar/sim/expert.hpp"         // IWYU pragma: export
