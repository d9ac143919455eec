#include "densenote/serve.hpp"

#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace densenote::serve {

using nlohmann::json;

Server::Server(ann::IvfPqIndex index, TowerParams tower, ServerConfig cfg)
    : index_(std::move(index)),
      tower_(std::move(tower)),
      tok_(tower_.cfg.term_vocab),
      cfg_(std::move(cfg)) {}

Server::~Server() { stop(); }

void Server::start() {
    if (running_.exchange(true)) return;
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("serve: socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(cfg_.port));
    if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("serve: bad host " + cfg_.host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw IoError("serve: bind failed on " + cfg_.host + ":" +
                      std::to_string(cfg_.port));
    if (::listen(listen_fd_, 64) != 0) throw IoError("serve: listen failed");

    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
    port_ = ntohs(bound.sin_port);

    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard<std::mutex> lock(workers_mu_);
        workers.swap(workers_);
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

void Server::accept_loop() {
    while (running_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_.load()) break;
            continue;
        }
        std::lock_guard<std::mutex> lock(workers_mu_);
        workers_.emplace_back([this, fd] { connection_loop(fd); });
    }
}

void Server::connection_loop(int fd) {
    std::string buffer;
    char chunk[4096];
    while (running_.load()) {
        const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            const std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (line.empty()) continue;
            const std::string reply = handle_line(line) + "\n";
            std::size_t sent = 0;
            while (sent < reply.size()) {
                const ssize_t w = ::send(fd, reply.data() + sent,
                                         reply.size() - sent, MSG_NOSIGNAL);
                if (w <= 0) {
                    ::close(fd);
                    return;
                }
                sent += static_cast<std::size_t>(w);
            }
        }
    }
    ::close(fd);
}

std::string Server::handle_line(const std::string& line) const {
    const auto t0 = std::chrono::steady_clock::now();
    json req;
    try {
        req = json::parse(line);
    } catch (const std::exception&) {
        return json{{"error", "malformed JSON"}}.dump();
    }
    try {
        if (!req.is_object() || !req.contains("query") || !req.at("query").is_string())
            return json{{"error", "missing string field 'query'"}}.dump();
        const std::string text = req.at("query").get<std::string>();
        int topk = req.value("topk", cfg_.default_topk);
        int nprobe = req.value("nprobe", cfg_.default_nprobe);
        topk = std::clamp(topk, 0, cfg_.max_topk);

        auto emb = embed_query(tower_, tok_, text,
                               tower_.cfg.bidirectional ? QueryRenderMode::StudentCls
                                                        : QueryRenderMode::TeacherEos)
                       .vec;
        const double nrm = norm(emb.data(), emb.size());
        if (!(nrm > 0.0)) return json{{"error", "degenerate query embedding"}}.dump();
        for (auto& v : emb) v /= nrm;

        std::vector<ann::SearchHit> hits;
        if (topk > 0) hits = ann::search(index_, emb.data(), nprobe, topk);

        json ids = json::array(), scores = json::array();
        for (const auto& h : hits) {
            ids.push_back(h.id);
            scores.push_back(1.0 - 0.5 * h.dist);  // cosine on unit vectors
        }
        const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        served_.fetch_add(1);
        return json{{"ids", std::move(ids)},
                    {"scores", std::move(scores)},
                    {"latency_us", us}}
            .dump();
    } catch (const EmptyQuery&) {
        return json{{"error", "empty query"}}.dump();
    } catch (const std::exception& e) {
        return json{{"error", e.what()}}.dump();
    }
}

}  // namespace densenote::serve
