// Copyright 2026 The Subtrack Authors. All Rights Reserved.
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

#ifndef SUBTRACK_ERROR_HPP_
#define SUBTRACK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace subtrack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SUBTRACK_DEFINE_ERROR(Name)              \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(#Name ": " + what) {}            \
  }

SUBTRACK_DEFINE_ERROR(RankDeficient);
SUBTRACK_DEFINE_ERROR(DimensionMismatch);
SUBTRACK_DEFINE_ERROR(IllConditioned);
SUBTRACK_DEFINE_ERROR(InvalidSpacing);
SUBTRACK_DEFINE_ERROR(InfeasibleFractions);
SUBTRACK_DEFINE_ERROR(SolverDidNotConverge);
SUBTRACK_DEFINE_ERROR(InvalidPartition);
SUBTRACK_DEFINE_ERROR(ShapeMismatch);
SUBTRACK_DEFINE_ERROR(RankCollapse);
SUBTRACK_DEFINE_ERROR(RatioTooLarge);
SUBTRACK_DEFINE_ERROR(InvalidMode);
SUBTRACK_DEFINE_ERROR(ConfigError);
SUBTRACK_DEFINE_ERROR(SchemaError);
SUBTRACK_DEFINE_ERROR(IoError);

#undef SUBTRACK_DEFINE_ERROR

}  // namespace subtrack

#endif  // SUBTRACK_ERROR_HPP_
