#pragma once

#include "gazeguide/config.hpp"
#include "gazeguide/passage.hpp"
#include "gazeguide/replay.hpp"
#include "gazeguide/session.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace gazeguide {

struct ServiceOptions {
    /// Session journals live under <data_dir>/sessions/<id>/.
    std::filesystem::path data_dir = "gazeguide-data";
    std::vector<PassageModel> passages;
    /// Static assets served at /; empty disables.
    std::filesystem::path ui_dir;
    /// Bearer token required on /v1 routes; empty disables.
    std::string token;
    std::string cors_origin = "*";
    BackendKind analysis = BackendKind::Rule;
    BackendKind assistant = BackendKind::Rule;
    std::shared_ptr<LlmClient> llm;
    int llm_retries = 2;
    SessionOptions session;
    DetectorParams params;
};

struct SessionDescriptor {
    std::string session_id;
    std::string passage_id;
    AnalysisMode condition = AnalysisMode::Gaze;
    std::string policy;
    std::string participant_id;
    std::string created_at;
    /// "READING" before finish, then the conversation state name.
    std::string state = "READING";
    std::string idempotency_key;

    bool operator==(const SessionDescriptor&) const = default;
};

/// JSON status and body; content_type is application/json unless set.
struct ServiceResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// HTTP-independent service logic. Every command on a session runs under that
/// session's mutex and is journaled before it returns.
class ServiceCore {
public:
    /// Loads every journal under data_dir. Throws ValidationError on a corrupt journal.
    explicit ServiceCore(ServiceOptions options);
    ~ServiceCore();

    ServiceResponse list_passages() const;
    ServiceResponse get_passage(const std::string& passage_id) const;

    ServiceResponse create_session(const std::string& body, const std::string& idempotency_key = {});
    ServiceResponse list_sessions() const;
    ServiceResponse get_session(const std::string& id) const;
    ServiceResponse put_layout(const std::string& id, const std::string& body);
    ServiceResponse get_layout(const std::string& id) const;
    ServiceResponse post_gaze(const std::string& id, const std::string& body);
    ServiceResponse finish(const std::string& id);
    ServiceResponse chat(const std::string& id, const std::string& body);
    ServiceResponse transcript(const std::string& id) const;
    ServiceResponse analysis(const std::string& id, const std::string& mode) const;
    ServiceResponse post_rating(const std::string& id, const std::string& body);
    ServiceResponse ratings(const std::string& id) const;

    const ServiceOptions& options() const { return options_; }
    std::size_t session_count() const;

    struct Entry;

private:
    std::shared_ptr<Entry> find(const std::string& id) const;
    const PassageModel* passage(const std::string& id) const;
    std::shared_ptr<Entry> build_entry(SessionDescriptor desc, const TriggerPolicy& policy,
                                       const PassageModel& passage, std::int64_t created_unix_ms) const;
    void restore(const std::filesystem::path& dir);
    std::string new_session_id();

    ServiceOptions options_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::map<std::string, std::string> idempotency_;
    std::uint64_t counter_ = 0;
};

/// Registers the /v1 routes, CORS, bearer-token check and static UI mount.
void mount_routes(httplib::Server& server, ServiceCore& core);

/// Blocks serving on host:port.
int serve(ServiceCore& core, const std::string& host, int port);

std::string descriptor_to_json(const SessionDescriptor& d);

} // namespace gazeguide
