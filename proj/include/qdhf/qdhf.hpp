#pragma once

#include "qdhf/archive.hpp"
#include "qdhf/config.hpp"
#include "qdhf/engine.hpp"
#include "qdhf/evalsuite.hpp"
#include "qdhf/feedback.hpp"
#include "qdhf/feedback_channel.hpp"
#include "qdhf/io.hpp"
#include "qdhf/judgment.hpp"
#include "qdhf/latent/autoencoder.hpp"
#include "qdhf/latent/model.hpp"
#include "qdhf/latent/pca.hpp"
#include "qdhf/latent/triplet.hpp"
#include "qdhf/metrics.hpp"
#include "qdhf/runner.hpp"
#include "qdhf/tasks/arm.hpp"
#include "qdhf/tasks/maze.hpp"
#include "qdhf/tasks/task.hpp"
#include "qdhf/types.hpp"
