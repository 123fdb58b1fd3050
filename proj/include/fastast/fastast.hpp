/*
 * Copyright (c) 2026, The FastAST Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "fastast/bench.hpp"
#include "fastast/common.hpp"
#include "fastast/features.hpp"
#include "fastast/head.hpp"
#include "fastast/kd.hpp"
#include "fastast/model.hpp"
#include "fastast/model_io.hpp"
#include "fastast/patchify.hpp"
#include "fastast/synthetic.hpp"
#include "fastast/tome.hpp"
#include "fastast/transformer.hpp"
