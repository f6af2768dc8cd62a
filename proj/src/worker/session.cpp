#include "zoorun/session.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>

#include "zoorun/errors.hpp"
#include "zoorun/model_spec.hpp"

namespace zoorun::worker {

namespace fs = std::filesystem;

namespace {

std::atomic<int> g_next_session_id{1};

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void write_all(int fd, std::span<const std::byte> data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WorkerCrashed(std::string("worker pipe write failed: ") +
                          std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

}  // namespace

std::unique_ptr<ModelSession> ModelSession::open(
    const engines::InstalledEngine& engine, const fs::path& model_dir,
    const std::string& weights_tag, SessionConfig cfg) {
  // A dead worker must surface as WorkerCrashed, not SIGPIPE.
  static const int sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)sigpipe_ignored;

  // Locate the weights file for the tag before spawning anything.
  fs::path weights_path;
  {
    const fs::path rdf = model_dir / "rdf.yaml";
    if (!fs::exists(rdf))
      throw LoadError("model dir lacks rdf.yaml: " + model_dir.string());
    spec::ModelDescriptor d = spec::parse_model_descriptor_file(rdf);
    const spec::WeightsEntry* entry = nullptr;
    for (const auto& w : d.weights)
      if (w.format == weights_tag) entry = &w;
    if (!entry)
      throw LoadError("model '" + d.name + "' has no weights format '" +
                      weights_tag + "'");
    weights_path = model_dir / entry->source;
    if (!fs::exists(weights_path))
      throw LoadError("weights file missing: " + weights_path.string());
  }

  const fs::path worker_bin = engine.root_dir / "worker";
  if (!fs::exists(worker_bin))
    throw WorkerSpawnError("worker binary absent from engine dir: " +
                           worker_bin.string());
  if (::access(worker_bin.c_str(), X_OK) != 0)
    throw WorkerSpawnError("worker binary not executable: " +
                           worker_bin.string());

  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw WorkerSpawnError("pipe() failed");

  const pid_t pid = ::fork();
  if (pid < 0) throw WorkerSpawnError("fork() failed");
  if (pid == 0) {
    // Own process group, so a kill reaches any children the worker spawns
    // (they share our pipe fds and would otherwise hold them open).
    ::setpgid(0, 0);
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::setenv("LD_LIBRARY_PATH", engine.root_dir.c_str(), 1);
    ::setenv("ZOORUN_ENGINE_ROOT", engine.root_dir.c_str(), 1);
    ::execl(worker_bin.c_str(), worker_bin.c_str(), "--serve",
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);  // mirror the child's setpgid; one side wins the race
  ::close(to_child[0]);
  ::close(from_child[1]);

  auto session = std::unique_ptr<ModelSession>(new ModelSession());
  session->session_id_ = g_next_session_id.fetch_add(1);
  session->cfg_ = cfg;
  session->pid_ = pid;
  session->to_worker_ = to_child[1];
  session->from_worker_ = from_child[0];
  session->state_ = State::Loaded;  // provisional until LOAD ACK

  const int64_t rid = session->next_request_id_++;
  nlohmann::json header = {
      {"op", "LOAD"},
      {"request_id", rid},
      {"meta",
       {{"model_dir", model_dir.string()},
        {"weights_tag", weights_tag},
        {"weights_path", weights_path.string()}}}};
  try {
    session->send_frame(header, {});
    Frame resp = session->read_frame(cfg.load_timeout_s);
    const std::string op = resp.header.at("op").get<std::string>();
    if (resp.header.at("request_id").get<int64_t>() != rid)
      throw ProtocolError("LOAD response has wrong request_id");
    if (op == "NACK")
      throw LoadError("worker rejected model: " +
                      resp.header["meta"].value("message", std::string()));
    if (op != "ACK") throw ProtocolError("unexpected LOAD response op " + op);
  } catch (...) {
    session->kill_worker();
    throw;
  }
  return session;
}

ModelSession::~ModelSession() { close(); }

void ModelSession::send_frame(const nlohmann::json& header,
                              const std::vector<Tensor>& tensors) {
  write_all(to_worker_, encode_frame(header, tensors));
}

Frame ModelSession::read_frame(double timeout_s) {
  const double deadline = now_s() + timeout_s;
  std::vector<std::byte> buf;
  size_t need = 4;
  bool have_len = false;
  while (buf.size() < need) {
    const double remaining = deadline - now_s();
    if (remaining <= 0) {
      kill_worker();
      throw TimeoutError("worker response timed out after " +
                         std::to_string(timeout_s) + " s");
    }
    struct pollfd pfd = {from_worker_, POLLIN, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(remaining * 1000) + 1);
    if (pr < 0) {
      if (errno == EINTR) continue;
      kill_worker();
      throw WorkerCrashed("poll on worker pipe failed");
    }
    if (pr == 0) continue;
    std::byte chunk[1 << 16];
    ssize_t n = ::read(from_worker_, chunk,
                       std::min(sizeof(chunk), need - buf.size()));
    if (n < 0) {
      if (errno == EINTR) continue;
      kill_worker();
      throw WorkerCrashed("worker pipe read failed");
    }
    if (n == 0) {
      kill_worker();
      throw WorkerCrashed("worker exited mid-response (session " +
                          std::to_string(session_id_) + ")");
    }
    buf.insert(buf.end(), chunk, chunk + n);
    if (!have_len && buf.size() >= 4) {
      uint32_t blen = 0;
      for (int i = 0; i < 4; ++i)
        blen |= static_cast<uint32_t>(std::to_integer<uint8_t>(buf[i]))
                << (8 * i);
      need = 4 + static_cast<size_t>(blen);
      have_len = true;
    }
  }
  return decode_frame(buf);
}

std::vector<Tensor> ModelSession::run(const std::vector<Tensor>& inputs) {
  if (state_ == State::Closed)
    throw SessionClosed("run on closed session " +
                        std::to_string(session_id_));
  if (state_ == State::Crashed)
    throw WorkerCrashed("run on crashed session " +
                        std::to_string(session_id_));
  const int64_t rid = next_request_id_++;
  nlohmann::json header = {{"op", "RUN"}, {"request_id", rid}};
  Frame resp;
  try {
    send_frame(header, inputs);
    resp = read_frame(cfg_.run_timeout_s);
  } catch (const WorkerCrashed&) {
    kill_worker();
    throw;
  }
  const std::string op = resp.header.at("op").get<std::string>();
  if (resp.header.at("request_id").get<int64_t>() != rid)
    throw ProtocolError("RUN response has wrong request_id");
  if (op == "NACK")
    throw InferenceError("worker inference failed: " +
                         resp.header["meta"].value("message", std::string()));
  if (op != "ACK") throw ProtocolError("unexpected RUN response op " + op);
  return std::move(resp.tensors);
}

void ModelSession::close() {
  if (state_ == State::Loaded) {
    try {
      send_frame({{"op", "CLOSE"}, {"request_id", next_request_id_++}}, {});
    } catch (...) {
    }
    const double deadline = now_s() + cfg_.close_grace_s;
    int status = 0;
    bool exited = false;
    while (now_s() < deadline) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        exited = true;
        break;
      }
      ::usleep(20000);
    }
    if (!exited) {
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  if (to_worker_ >= 0) ::close(to_worker_);
  if (from_worker_ >= 0) ::close(from_worker_);
  to_worker_ = from_worker_ = -1;
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  state_ = State::Closed;
}

void ModelSession::kill_worker() {
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  if (to_worker_ >= 0) ::close(to_worker_);
  if (from_worker_ >= 0) ::close(from_worker_);
  to_worker_ = from_worker_ = -1;
  state_ = State::Crashed;
}

}  // namespace zoorun::worker
