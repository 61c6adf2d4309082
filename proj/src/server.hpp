#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "backend.hpp"
#include "batching.hpp"
#include "framing.hpp"
#include "repr_cache.hpp"

namespace pws {

struct ServerConfig {
    std::size_t token_budget = 4096;
    std::size_t max_batch = 64;
    int read_timeout_ms = -1;  // block
};

// Framed-protocol inference server. Sessions are concurrent; chunks from all
// sessions execute FIFO through one queue, serializing backend access.
// Encoder backends run through a shared representation cache.
class Server {
public:
    Server(std::shared_ptr<Backend> backend, const std::string& bind_address, ServerConfig config);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    const std::string& bound_address() const { return bound_address_; }
    int port() const { return port_; }

    void stop();
    // Blocks until stop() (or a fatal accept error).
    void wait();

    std::uint64_t chunks_executed() const { return chunks_executed_; }
    ReprCache& repr_cache() { return repr_cache_; }

private:
    struct Session {
        int fd = -1;
        std::uint64_t id = 0;
        std::mutex write_mutex;
        std::int64_t last_chunk_id = -1;
        std::atomic<bool> open{true};

        ~Session();  // closes fd after the last reference (reader or queued job)
    };
    struct Job {
        std::shared_ptr<Session> session;
        std::int64_t chunk_id = 0;
        std::vector<Query> queries;
    };

    void accept_loop();
    void session_loop(std::shared_ptr<Session> session);
    void executor_loop();
    void handle_frame(const std::shared_ptr<Session>& session, const Frame& frame,
                      bool& close_session);
    void send_frame(Session& session, const Frame& frame);
    void send_error(Session& session, int code, const std::string& message,
                    std::int64_t chunk_id = -1);
    std::vector<Response> execute_chunk(const std::vector<Query>& queries);

    std::shared_ptr<Backend> backend_;
    ServerConfig config_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::string bound_address_;

    std::thread accept_thread_;
    std::thread executor_thread_;
    std::vector<std::thread> session_threads_;
    std::vector<std::weak_ptr<Session>> sessions_;
    std::mutex sessions_mutex_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<Job> queue_;

    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> next_session_id_{1};
    std::atomic<std::uint64_t> chunks_executed_{0};
    ReprCache repr_cache_;
};

std::unique_ptr<Server> serve(std::shared_ptr<Backend> backend, const std::string& bind_address,
                              ServerConfig config = {});

}  // namespace pws
