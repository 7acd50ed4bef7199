// Copyright 2026 The ASN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "asn/context.hpp"
#include "asn/context_fit.hpp"
#include "asn/error.hpp"
#include "asn/experiments.hpp"
#include "asn/geometry.hpp"
#include "asn/io.hpp"
#include "asn/losses.hpp"
#include "asn/metrics.hpp"
#include "asn/normals.hpp"
#include "asn/parallel.hpp"
#include "asn/scenes.hpp"
