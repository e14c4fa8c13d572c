// sot/feature_io.h

// Copyright 2026  The sotasr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>

#include "sot/common.h"

namespace sot {

// Feature file format: magic "FEAT", format version (1 byte), M and F as
// little-endian u32, then M*F little-endian f32 values, row-major.

void write_features(std::ostream& os, const FeatureMatrix& feats);
void write_features(const std::string& path, const FeatureMatrix& feats);

FeatureMatrix read_features(std::istream& is);
FeatureMatrix read_features(const std::string& path);

}  // namespace sot
