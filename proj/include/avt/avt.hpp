#pragma once

#include "avt/actions.hpp"
#include "avt/agent.hpp"
#include "avt/camera.hpp"
#include "avt/common.hpp"
#include "avt/config.hpp"
#include "avt/dqn/checkpoint.hpp"
#include "avt/dqn/learning.hpp"
#include "avt/dqn/network.hpp"
#include "avt/dqn/replay.hpp"
#include "avt/dqn/trainer.hpp"
#include "avt/dynamics.hpp"
#include "avt/env.hpp"
#include "avt/evalkit.hpp"
#include "avt/image.hpp"
#include "avt/pbvs.hpp"
#include "avt/scene.hpp"
