#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canonical.hpp"

namespace pws {

// Wire protocol: frames of [u32 length, big-endian][u8 type][payload], the
// length covering type byte and payload. Payloads are UTF-8 JSON.
enum class FrameType : std::uint8_t {
    hello = 1,
    hello_ack = 2,
    run_chunk = 3,
    chunk_result = 4,
    status = 5,
    error = 6,
};

constexpr int kProtocolVersion = 1;

// Wire error codes carried by ERROR frames.
enum WireError : int {
    kWireProtocol = 1,
    kWireMalformed = 2,
    kWireCapability = 3,
    kWireBackend = 4,
    kWireInternal = 5,
};

struct Frame {
    FrameType type = FrameType::error;
    Json payload;

    bool operator==(const Frame& o) const { return type == o.type && payload == o.payload; }
};

std::vector<unsigned char> encode_frame(const Frame& f);
// Decodes one full frame from a buffer; throws on malformed input.
Frame decode_frame(const unsigned char* data, std::size_t size);

// Blocking frame I/O over a connected socket. read_frame returns false on a
// clean peer close before any byte of a frame; timeout_ms < 0 blocks.
bool read_frame(int fd, Frame& out, int timeout_ms = -1);
void write_frame(int fd, const Frame& f);

}  // namespace pws
