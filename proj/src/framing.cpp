#include "framing.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <cerrno>
#include <cstring>

#include "error.hpp"

namespace pws {

namespace {

constexpr std::uint32_t kMaxFrame = 256u << 20;

void write_all(int fd, const unsigned char* data, std::size_t size) {
    std::size_t sent = 0;
    while (sent < size) {
        const ssize_t n = ::send(fd, data + sent, size - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

// Returns false on clean EOF at offset 0, throws on mid-read EOF or error.
bool read_exact(int fd, unsigned char* data, std::size_t size, int timeout_ms) {
    std::size_t got = 0;
    while (got < size) {
        if (timeout_ms >= 0) {
            pollfd pfd{fd, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, timeout_ms);
            if (pr == 0) throw TransportError("read timeout");
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("poll failed: ") + std::strerror(errno));
            }
        }
        const ssize_t n = ::recv(fd, data + got, size - got, 0);
        if (n == 0) {
            if (got == 0) return false;
            throw TransportError("connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

std::vector<unsigned char> encode_frame(const Frame& f) {
    const std::string payload = canonical_dump(f.payload);
    const std::uint32_t len = static_cast<std::uint32_t>(1 + payload.size());
    std::vector<unsigned char> out;
    out.reserve(4 + len);
    out.push_back(static_cast<unsigned char>(len >> 24));
    out.push_back(static_cast<unsigned char>(len >> 16));
    out.push_back(static_cast<unsigned char>(len >> 8));
    out.push_back(static_cast<unsigned char>(len));
    out.push_back(static_cast<unsigned char>(f.type));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Frame decode_frame(const unsigned char* data, std::size_t size) {
    if (size < 5) throw Error(ErrorCode::Parse, "frame too short");
    const std::uint32_t len = (static_cast<std::uint32_t>(data[0]) << 24) |
                              (static_cast<std::uint32_t>(data[1]) << 16) |
                              (static_cast<std::uint32_t>(data[2]) << 8) |
                              static_cast<std::uint32_t>(data[3]);
    if (len == 0 || len > kMaxFrame || 4 + static_cast<std::size_t>(len) != size)
        throw Error(ErrorCode::Parse, "frame length mismatch");
    const auto tag = data[4];
    if (tag < 1 || tag > 6) throw Error(ErrorCode::Parse, "unknown frame type " + std::to_string(tag));
    Frame f;
    f.type = static_cast<FrameType>(tag);
    try {
        f.payload = Json::parse(data + 5, data + size);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("frame payload is not valid JSON: ") + e.what());
    }
    return f;
}

bool read_frame(int fd, Frame& out, int timeout_ms) {
    unsigned char header[4];
    if (!read_exact(fd, header, 4, timeout_ms)) return false;
    const std::uint32_t len = (static_cast<std::uint32_t>(header[0]) << 24) |
                              (static_cast<std::uint32_t>(header[1]) << 16) |
                              (static_cast<std::uint32_t>(header[2]) << 8) |
                              static_cast<std::uint32_t>(header[3]);
    if (len == 0 || len > kMaxFrame)
        throw Error(ErrorCode::Parse, "frame length out of range: " + std::to_string(len));
    std::vector<unsigned char> body(4 + len);
    std::memcpy(body.data(), header, 4);
    if (!read_exact(fd, body.data() + 4, len, timeout_ms))
        throw TransportError("connection closed mid-frame");
    out = decode_frame(body.data(), body.size());
    return true;
}

void write_frame(int fd, const Frame& f) {
    const auto bytes = encode_frame(f);
    write_all(fd, bytes.data(), bytes.size());
}

}  // namespace pws
