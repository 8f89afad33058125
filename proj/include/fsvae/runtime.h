// Copyright 2026 The FSVAE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FSVAE_RUNTIME_H_
#define FSVAE_RUNTIME_H_

namespace fsvae {

// Keeps large activation buffers on the heap between training steps instead
// of returning them to the kernel after every free. No-op outside glibc.
void TuneAllocator();

}  // namespace fsvae

#endif  // FSVAE_RUNTIME_H_
