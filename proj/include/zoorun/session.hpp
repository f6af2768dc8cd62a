#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "zoorun/engine_manager.hpp"
#include "zoorun/frame.hpp"

namespace zoorun::worker {

struct SessionConfig {
  double load_timeout_s = 30.0;
  double run_timeout_s = 300.0;
  double close_grace_s = 2.0;
};

// One child worker process hosting one loaded model, driven over a framed
// pipe protocol on its standard streams. Confined to one controlling
// thread at a time; distinct sessions are fully independent.
class ModelSession {
 public:
  enum class State { Loaded, Closed, Crashed };

  // Spawns `<engine_root>/worker --serve` with the engine root on the
  // library path and sends the LOAD frame.
  static std::unique_ptr<ModelSession> open(
      const engines::InstalledEngine& engine,
      const std::filesystem::path& model_dir, const std::string& weights_tag,
      SessionConfig cfg = {});

  ~ModelSession();
  ModelSession(const ModelSession&) = delete;
  ModelSession& operator=(const ModelSession&) = delete;

  // Sends a RUN frame and decodes the response tensors.
  std::vector<Tensor> run(const std::vector<Tensor>& inputs);

  // Best-effort, idempotent: CLOSE frame, grace period, then SIGKILL.
  void close();

  State state() const { return state_; }
  int session_id() const { return session_id_; }
  int worker_pid() const { return pid_; }  // for fault-injection tests

 private:
  ModelSession() = default;
  void send_frame(const nlohmann::json& header,
                  const std::vector<Tensor>& tensors);
  Frame read_frame(double timeout_s);
  void kill_worker();

  int session_id_ = 0;
  State state_ = State::Closed;
  SessionConfig cfg_;
  int pid_ = -1;
  int to_worker_ = -1;    // write end
  int from_worker_ = -1;  // read end
  int64_t next_request_id_ = 1;
};

}  // namespace zoorun::worker
