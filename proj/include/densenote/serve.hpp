#pragma once

// Online query loop: newline-delimited JSON requests over TCP, answered by
// the student query tower against an immutable IVFPQ index.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "densenote/ann.hpp"
#include "densenote/tower.hpp"

namespace densenote::serve {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks an ephemeral port
    int default_topk = 10;
    int default_nprobe = 16;
    int max_topk = 10000;
};

// Requests: {"query": str, "topk": int, "nprobe": int}
// Responses: {"ids": [...], "scores": [...], "latency_us": int}
// Malformed input gets {"error": ...} and the connection stays open.
class Server {
public:
    Server(ann::IvfPqIndex index, TowerParams tower, ServerConfig cfg);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();
    void stop();
    int port() const { return port_; }
    std::uint64_t requests_served() const { return served_.load(); }

    // Request handling without the socket, used by the accept loop and tests.
    std::string handle_line(const std::string& line) const;

private:
    void accept_loop();
    void connection_loop(int fd);

    ann::IvfPqIndex index_;
    TowerParams tower_;
    Tokenizer tok_;
    ServerConfig cfg_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    mutable std::atomic<std::uint64_t> served_{0};
    std::thread acceptor_;
    std::vector<std::thread> workers_;
    std::mutex workers_mu_;
};

}  // namespace densenote::serve
