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

// Kernel ABI pieces for io_uring newer than the installed uapi headers. Values
// match include/uapi/linux/io_uring.h of Linux 6.x.

#include <linux/io_uring.h>
#include <linux/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <cstdint>

namespace uring_engine::io::abi {

// setup flags
inline constexpr std::uint32_t kSetupIopoll = 1u << 0;
inline constexpr std::uint32_t kSetupSqpoll = 1u << 1;
inline constexpr std::uint32_t kSetupSqAff = 1u << 2;
inline constexpr std::uint32_t kSetupCqSize = 1u << 3;
inline constexpr std::uint32_t kSetupClamp = 1u << 4;
inline constexpr std::uint32_t kSetupRDisabled = 1u << 6;
inline constexpr std::uint32_t kSetupSubmitAll = 1u << 7;
inline constexpr std::uint32_t kSetupCoopTaskrun = 1u << 8;
inline constexpr std::uint32_t kSetupTaskrunFlag = 1u << 9;
inline constexpr std::uint32_t kSetupSqe128 = 1u << 10;
inline constexpr std::uint32_t kSetupCqe32 = 1u << 11;
inline constexpr std::uint32_t kSetupSingleIssuer = 1u << 12;
inline constexpr std::uint32_t kSetupDeferTaskrun = 1u << 13;

// opcodes
inline constexpr std::uint8_t kOpNop = 0;
inline constexpr std::uint8_t kOpFsync = 3;
inline constexpr std::uint8_t kOpReadFixed = 4;
inline constexpr std::uint8_t kOpWriteFixed = 5;
inline constexpr std::uint8_t kOpLinkTimeout = 15;
inline constexpr std::uint8_t kOpRead = 22;
inline constexpr std::uint8_t kOpWrite = 23;
inline constexpr std::uint8_t kOpSend = 26;
inline constexpr std::uint8_t kOpRecv = 27;
inline constexpr std::uint8_t kOpUringCmd = 46;
inline constexpr std::uint8_t kOpSendZc = 47;
inline constexpr std::uint8_t kOpRecvZc = 58;

// sqe flags
inline constexpr std::uint8_t kSqeFixedFile = 1u << 0;
inline constexpr std::uint8_t kSqeIoLink = 1u << 2;
inline constexpr std::uint8_t kSqeAsync = 1u << 4;
inline constexpr std::uint8_t kSqeBufferSelect = 1u << 5;

// send/recv ioprio flags
inline constexpr std::uint16_t kRecvSendPollFirst = 1u << 0;
inline constexpr std::uint16_t kRecvMultishot = 1u << 1;
inline constexpr std::uint16_t kRecvSendFixedBuf = 1u << 2;

inline constexpr std::uint32_t kFsyncDatasync = 1u << 0;

// cqe flags
inline constexpr std::uint32_t kCqeBuffer = 1u << 0;
inline constexpr std::uint32_t kCqeMore = 1u << 1;
inline constexpr std::uint32_t kCqeNotif = 1u << 3;
inline constexpr std::uint32_t kCqeBufferShift = 16;

// sq ring flags
inline constexpr std::uint32_t kSqNeedWakeup = 1u << 0;

// enter flags
inline constexpr std::uint32_t kEnterGetEvents = 1u << 0;
inline constexpr std::uint32_t kEnterSqWakeup = 1u << 1;
inline constexpr std::uint32_t kEnterSqWait = 1u << 2;
inline constexpr std::uint32_t kEnterExtArg = 1u << 3;

// register opcodes
inline constexpr unsigned kRegisterBuffers = 0;
inline constexpr unsigned kUnregisterBuffers = 1;
inline constexpr unsigned kRegisterFiles = 2;
inline constexpr unsigned kUnregisterFiles = 3;
inline constexpr unsigned kRegisterProbe = 8;
inline constexpr unsigned kRegisterEnableRings = 12;
inline constexpr unsigned kRegisterPbufRing = 22;
inline constexpr unsigned kRegisterNapi = 27;

inline constexpr std::uint64_t kOffSqRing = 0;
inline constexpr std::uint64_t kOffCqRing = 0x8000000ULL;
inline constexpr std::uint64_t kOffSqes = 0x10000000ULL;

/// Submission queue entry, 64-byte layout. SQE128 rings use two consecutive
/// slots; the command area then spans bytes 48..127.
struct Sqe {
  std::uint8_t opcode;
  std::uint8_t flags;
  std::uint16_t ioprio;
  std::int32_t fd;
  std::uint64_t off;  // also cmd_op (low 32 bits) for URING_CMD
  std::uint64_t addr;
  std::uint32_t len;
  std::uint32_t op_flags;
  std::uint64_t user_data;
  std::uint16_t buf_index;  // or buf_group
  std::uint16_t personality;
  std::int32_t file_index;
  std::uint64_t addr3;
  std::uint64_t pad;
};
static_assert(sizeof(Sqe) == 64);

struct Cqe {
  std::uint64_t user_data;
  std::int32_t res;
  std::uint32_t flags;
};
static_assert(sizeof(Cqe) == 16);

struct KernelTimespec {
  std::int64_t tv_sec;
  long long tv_nsec;
};

struct GeteventsArg {
  std::uint64_t sigmask;
  std::uint32_t sigmask_sz;
  std::uint32_t min_wait_usec;
  std::uint64_t ts;
};

struct BufRing {
  std::uint64_t addr;
  std::uint32_t len;
  std::uint16_t bid;
  std::uint16_t resv;  // entry 0: ring tail
};

struct BufReg {
  std::uint64_t ring_addr;
  std::uint32_t ring_entries;
  std::uint16_t bgid;
  std::uint16_t flags;
  std::uint64_t resv[3];
};

struct Napi {
  std::uint32_t busy_poll_to;
  std::uint8_t prefer_busy_poll;
  std::uint8_t opcode;
  std::uint8_t pad[2];
  std::uint32_t op_param;
  std::uint32_t resv;
};

struct ProbeOp {
  std::uint8_t op;
  std::uint8_t resv;
  std::uint16_t flags;  // bit 0: supported
  std::uint32_t resv2;
};

struct Probe {
  std::uint8_t last_op;
  std::uint8_t ops_len;
  std::uint16_t resv;
  std::uint32_t resv2[3];
  ProbeOp ops[256];
};

// NVMe passthrough command (struct nvme_uring_cmd).
struct NvmeUringCmd {
  std::uint8_t opcode;
  std::uint8_t flags;
  std::uint16_t rsvd1;
  std::uint32_t nsid;
  std::uint32_t cdw2;
  std::uint32_t cdw3;
  std::uint64_t metadata;
  std::uint64_t addr;
  std::uint32_t metadata_len;
  std::uint32_t data_len;
  std::uint32_t cdw10;
  std::uint32_t cdw11;
  std::uint32_t cdw12;
  std::uint32_t cdw13;
  std::uint32_t cdw14;
  std::uint32_t cdw15;
  std::uint32_t timeout_ms;
  std::uint32_t rsvd2;
};
static_assert(sizeof(NvmeUringCmd) == 72);

inline constexpr std::uint8_t kNvmeCmdFlush = 0x00;
inline constexpr std::uint8_t kNvmeCmdWrite = 0x01;
inline constexpr std::uint8_t kNvmeCmdRead = 0x02;
inline constexpr unsigned long kNvmeUringCmdIo = _IOWR('N', 0x80, NvmeUringCmd);
inline constexpr unsigned long kNvmeIoctlId = _IO('N', 0x40);

inline int sys_setup(unsigned entries, io_uring_params* p) {
  return int(::syscall(__NR_io_uring_setup, entries, p));
}
inline int sys_enter(int fd, unsigned to_submit, unsigned min_complete, unsigned flags, const void* arg,
                     std::size_t argsz) {
  return int(::syscall(__NR_io_uring_enter, fd, to_submit, min_complete, flags, arg, argsz));
}
inline int sys_register(int fd, unsigned opcode, const void* arg, unsigned nr_args) {
  return int(::syscall(__NR_io_uring_register, fd, opcode, arg, nr_args));
}

}  // namespace uring_engine::io::abi
