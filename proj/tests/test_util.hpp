// Copyright 2026 The uring-engine Authors
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

#include <fcntl.h>
#include <stdlib.h>
#include <unistd.h>

#include <string>

#include <gtest/gtest.h>

#include "uring_engine/common/error.hpp"

#define EXPECT_ERROR_CODE(stmt, expected)                                         \
  do {                                                                            \
    try {                                                                         \
      (void)(stmt);                                                               \
      ADD_FAILURE() << #stmt " did not throw";                                    \
    } catch (const ::uring_engine::Error& e_) {                                   \
      EXPECT_EQ(e_.code(), expected) << e_.what();                                \
    }                                                                             \
  } while (0)

/// Unlinked scratch file in /tmp, removed on destruction.
class TempFile {
 public:
  TempFile() {
    char path[] = "/tmp/uring-engine-test-XXXXXX";
    fd_ = ::mkstemp(path);
    path_ = path;
  }
  ~TempFile() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  int fd() const { return fd_; }
  const std::string& path() const { return path_; }

 private:
  int fd_ = -1;
  std::string path_;
};
