#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sandman/rng.hpp"
#include "sandman/util.hpp"

// Chat-completion boundary. Every prompt in the system goes out through a
// ChatProvider; the HTTP provider speaks the chat-completions JSON schema and
// the mock/scripted providers make everything else testable offline. No other
// module builds wire payloads.

namespace sandman::llm {

struct ChatRequest {
    std::optional<std::string> system_message;
    std::string user_message;
    double temperature = 0.7;
    std::string model_id = "gpt-3.5-turbo";
    std::optional<int> max_tokens;

    void validate() const {
        if (user_message.empty()) throw std::invalid_argument("chat request: empty user message");
        if (!(temperature >= 0.0 && temperature <= 2.0))
            throw std::invalid_argument("chat request: temperature out of [0,2]");
        if (max_tokens && *max_tokens <= 0) throw std::invalid_argument("chat request: max_tokens <= 0");
    }
};

struct ChatResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::chrono::milliseconds latency{0};
};

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AuthError : GatewayError {
    using GatewayError::GatewayError;
};
struct RateLimited : GatewayError {
    using GatewayError::GatewayError;
};
struct TransportError : GatewayError {
    using GatewayError::GatewayError;
};
struct MalformedResponse : GatewayError {
    using GatewayError::GatewayError;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Wire schema (chat-completions JSON)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json wire_payload(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (request.system_message)
        messages.push_back({{"role", "system"}, {"content", *request.system_message}});
    messages.push_back({{"role", "user"}, {"content", request.user_message}});
    nlohmann::json payload{
        {"model", request.model_id},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
    };
    if (request.max_tokens) payload["max_tokens"] = *request.max_tokens;
    return payload;
}

inline ChatResponse parse_wire_response(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw MalformedResponse("response is not valid JSON");
    ChatResponse out;
    try {
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw MalformedResponse("response missing choices[0].message.content");
    }
    if (j.contains("usage")) {
        out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Capture log: JSONL of request/response pairs, for building fixtures
// ---------------------------------------------------------------------------

class CaptureLog {
public:
    explicit CaptureLog(const std::filesystem::path& path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::app);
        if (!out_) throw std::runtime_error("cannot open capture log: " + path.string());
    }

    void record(const ChatRequest& request, const ChatResponse& response) {
        nlohmann::json line{
            {"request", detail::wire_payload(request)},
            {"response",
             {{"text", response.text},
              {"prompt_tokens", response.prompt_tokens},
              {"completion_tokens", response.completion_tokens}}},
        };
        std::lock_guard lock(mu_);
        out_ << line.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mu_;
    std::ofstream out_;
};

// Decorator that mirrors traffic of an inner provider into a capture log.
class CapturingProvider : public ChatProvider {
public:
    CapturingProvider(std::shared_ptr<ChatProvider> inner, std::shared_ptr<CaptureLog> log)
        : inner_(std::move(inner)), log_(std::move(log)) {}

    ChatResponse complete(const ChatRequest& request) override {
        ChatResponse response = inner_->complete(request);
        log_->record(request, response);
        return response;
    }

    std::string name() const override { return inner_->name() + "+capture"; }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<CaptureLog> log_;
};

// ---------------------------------------------------------------------------
// Retry with exponential backoff
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int budget = 3;  // retries after the first attempt
    std::chrono::milliseconds base_backoff{500};
    double factor = 2.0;
    bool jitter = true;
    std::uint64_t jitter_seed = 0x5eed;
    // injectable for tests; defaults to a real sleep
    std::function<void(std::chrono::milliseconds)> sleeper;

    void validate() const {
        if (budget < 0) throw std::invalid_argument("retry policy: negative budget");
        if (base_backoff.count() < 0) throw std::invalid_argument("retry policy: negative backoff");
    }
};

class RetryingProvider : public ChatProvider {
public:
    RetryingProvider(std::shared_ptr<ChatProvider> inner, RetryPolicy policy)
        : inner_(std::move(inner)), policy_(std::move(policy)), jitter_rng_(policy_.jitter_seed) {
        policy_.validate();
    }

    ChatResponse complete(const ChatRequest& request) override {
        for (int attempt = 0;; ++attempt) {
            try {
                return inner_->complete(request);
            } catch (const RateLimited&) {
                if (attempt >= policy_.budget) throw;
            } catch (const TransportError&) {
                if (attempt >= policy_.budget) throw;
            }
            sleep_backoff(attempt);
        }
    }

    std::string name() const override { return inner_->name() + "+retry"; }

private:
    void sleep_backoff(int attempt) {
        double ms = static_cast<double>(policy_.base_backoff.count());
        for (int i = 0; i < attempt; ++i) ms *= policy_.factor;
        if (policy_.jitter) {
            std::lock_guard lock(mu_);
            ms *= jitter_rng_.uniform(0.5, 1.5);
        }
        auto d = std::chrono::milliseconds(static_cast<std::int64_t>(ms));
        if (policy_.sleeper) {
            policy_.sleeper(d);
        } else {
            std::this_thread::sleep_for(d);
        }
    }

    std::shared_ptr<ChatProvider> inner_;
    RetryPolicy policy_;
    std::mutex mu_;
    rng::Engine jitter_rng_;
};

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

struct ProviderConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "SANDMAN_API_KEY";
    std::string model = "gpt-3.5-turbo";
    std::chrono::milliseconds timeout{30000};
    int retry_budget = 3;
    std::chrono::milliseconds backoff_base{500};
    int max_in_flight = 4;  // shared semaphore bound on concurrent requests

    void validate() const {
        if (endpoint.empty()) throw std::invalid_argument("provider config: empty endpoint");
        if (timeout.count() <= 0) throw std::invalid_argument("provider config: timeout must be positive");
        if (retry_budget < 0) throw std::invalid_argument("provider config: negative retry budget");
        if (max_in_flight < 1) throw std::invalid_argument("provider config: max_in_flight must be >= 1");
    }
};

class HttpProvider : public ChatProvider {
public:
    explicit HttpProvider(ProviderConfig config) : config_(std::move(config)) {
        config_.validate();
        split_endpoint(config_.endpoint, base_, path_);
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }

    bool has_credential() const { return !api_key_.empty(); }
    const std::string& credential_env() const { return config_.api_key_env; }

    ChatResponse complete(const ChatRequest& request) override {
        request.validate();
        if (api_key_.empty())
            throw AuthError("no API credential: set the " + config_.api_key_env + " environment variable");

        httplib::Client client(base_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        client.set_connection_timeout(secs.count() > 0 ? secs.count() : 1, 0);
        client.set_read_timeout(secs.count() > 0 ? secs.count() : 1, 0);
        httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

        const std::string body = detail::wire_payload(request).dump();
        const auto started = std::chrono::steady_clock::now();
        httplib::Result res = client.Post(path_, headers, body, "application/json");
        const auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

        if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
        if (res->status == 401 || res->status == 403)
            throw AuthError("provider rejected credential (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status == 408)
            throw RateLimited("rate limited (HTTP " + std::to_string(res->status) + ")");
        if (res->status >= 500)
            throw TransportError("server error (HTTP " + std::to_string(res->status) + ")");
        if (res->status != 200)
            throw MalformedResponse("unexpected HTTP status " + std::to_string(res->status));

        ChatResponse out = detail::parse_wire_response(res->body);
        out.latency = elapsed;
        return out;
    }

    std::string name() const override { return "http:" + base_; }

private:
    static void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
        const auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw std::invalid_argument("provider config: endpoint must include scheme");
        const auto path_start = endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            base = endpoint;
            path = "/";
        } else {
            base = endpoint.substr(0, path_start);
            path = endpoint.substr(path_start);
        }
    }

    ProviderConfig config_;
    std::string base_;
    std::string path_;
    std::string api_key_;
};

// ---------------------------------------------------------------------------
// Mock providers
// ---------------------------------------------------------------------------

enum class MockBehaviour { MpiAnswerer, SchedulePlanner, Scripted };

struct MockConfig {
    // MpiAnswerer skews towards agreement when any of these words appear in
    // the prompt; SchedulePlanner nudges durations for a few task/keyword
    // pairings so persona conditions produce visibly different populations.
    std::vector<std::string> bias_keywords;
    std::vector<std::string> scripted_responses;
};

namespace detail {

inline std::uint64_t request_seed(std::uint64_t base_seed, const ChatRequest& request) {
    std::uint64_t h = rng::splitmix64(base_seed);
    h = rng::splitmix64(h ^ rng::fnv1a64(request.user_message));
    if (request.system_message) h = rng::splitmix64(h ^ rng::fnv1a64(*request.system_message));
    return h;
}

inline bool contains_word(std::string_view haystack, std::string_view needle) {
    return util::to_lower(haystack).find(util::to_lower(needle)) != std::string::npos;
}

// Tasks are advertised in bootstrap prompts as "- Name" bullet lines.
inline std::vector<std::string> extract_task_bullets(std::string_view prompt) {
    std::vector<std::string> tasks;
    for (std::string_view line : util::split_lines(prompt)) {
        std::string_view t = util::trim(line);
        if (t.size() > 2 && t.substr(0, 2) == "- ") tasks.emplace_back(util::trim(t.substr(2)));
    }
    return tasks;
}

inline std::string mpi_answer(const ChatRequest& request, std::uint64_t seed, const MockConfig& cfg) {
    rng::Engine rng(request_seed(seed, request));
    static constexpr const char* kLabels[5] = {"Very Accurate", "Moderately Accurate",
                                               "Neither Accurate Nor Inaccurate",
                                               "Moderately Inaccurate", "Very Inaccurate"};
    double weights[5] = {0.15, 0.20, 0.30, 0.20, 0.15};
    for (const auto& kw : cfg.bias_keywords) {
        if (!kw.empty() && contains_word(request.user_message, kw)) {
            weights[0] = 0.45;
            weights[1] = 0.30;
            weights[2] = 0.15;
            weights[3] = 0.07;
            weights[4] = 0.03;
            break;
        }
    }
    double roll = rng.uniform01();
    int idx = 4;
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) {
        acc += weights[i];
        if (roll < acc) {
            idx = i;
            break;
        }
    }
    const char letter = static_cast<char>('A' + idx);
    return std::string("(") + letter + "). " + kLabels[idx];
}

inline std::string filler_text(rng::Engine& rng) {
    static const std::vector<std::string> openers = {
        "Quarterly summary", "Meeting notes", "Project outline", "Status update", "Draft memo"};
    static const std::vector<std::string> bodies = {
        "covering the key milestones for this week",
        "with action items assigned to each owner",
        "describing the current blockers and next steps",
        "summarising feedback from the last review",
        "listing open questions for the team"};
    std::string out = rng.pick(openers) + " " + rng.pick(bodies) + ".";
    int extra = rng.uniform_int(0, 2);
    for (int i = 0; i < extra; ++i) out += " " + rng.pick(openers) + " " + rng.pick(bodies) + ".";
    return out;
}

inline std::string plan_schedule(const ChatRequest& request, std::uint64_t seed, const MockConfig&) {
    rng::Engine rng(request_seed(seed, request));
    std::vector<std::string> tasks = extract_task_bullets(request.user_message);
    if (tasks.empty()) return filler_text(rng);

    // small seeded reorder so positions are not a pure copy of the list
    int swaps = rng.uniform_int(0, 3);
    for (int i = 0; i < swaps && tasks.size() > 1; ++i) {
        std::size_t a = static_cast<std::size_t>(rng.below(tasks.size() - 1));
        std::swap(tasks[a], tasks[a + 1]);
    }

    const bool diligent = contains_word(request.user_message, "organised") ||
                          contains_word(request.user_message, "diligent") ||
                          contains_word(request.user_message, "disciplined");
    const bool social = contains_word(request.user_message, "outgoing") ||
                        contains_word(request.user_message, "energetic");

    static const std::vector<int> durations = {30, 45, 45, 60, 60, 90};
    std::string out = "Here is a full-day schedule:\n";
    int clock = 8 * 60;
    for (const auto& task : tasks) {
        if (rng.chance(0.08)) continue;  // occasionally skipped
        int reps = rng.chance(0.08) ? 2 : 1;
        for (int r = 0; r < reps; ++r) {
            int mins = rng.pick(durations);
            const std::string lowered = util::to_lower(task);
            if (diligent && (lowered == "work" || lowered == "research" || lowered == "plan")) mins += 30;
            if (social && (lowered == "meeting" || lowered == "call" || lowered == "collab.")) mins += 15;
            if (social && lowered == "work") mins = std::max(30, mins - 15);
            if (clock + mins > 24 * 60) break;
            out += util::format_hhmm(clock) + " - " + util::format_hhmm(clock + mins) + " | " + task + "\n";
            clock += mins;
        }
    }
    return out;
}

}  // namespace detail

// mock_complete(request, seed, behaviour): a pure function of its inputs for
// the MpiAnswerer and SchedulePlanner behaviours.
inline ChatResponse mock_complete(const ChatRequest& request, std::uint64_t seed, MockBehaviour behaviour,
                                  const MockConfig& config = {}) {
    request.validate();
    ChatResponse out;
    switch (behaviour) {
        case MockBehaviour::MpiAnswerer: out.text = detail::mpi_answer(request, seed, config); break;
        case MockBehaviour::SchedulePlanner: out.text = detail::plan_schedule(request, seed, config); break;
        case MockBehaviour::Scripted:
            throw std::invalid_argument("scripted behaviour needs a ScriptedProvider instance");
    }
    out.prompt_tokens = static_cast<std::int64_t>(request.user_message.size() / 4);
    out.completion_tokens = static_cast<std::int64_t>(out.text.size() / 4);
    return out;
}

class MockProvider : public ChatProvider {
public:
    MockProvider(MockBehaviour behaviour, std::uint64_t seed, MockConfig config = {})
        : behaviour_(behaviour), seed_(seed), config_(std::move(config)) {}

    ChatResponse complete(const ChatRequest& request) override {
        return mock_complete(request, seed_, behaviour_, config_);
    }

    std::string name() const override { return "mock"; }

    std::uint64_t seed() const { return seed_; }

private:
    MockBehaviour behaviour_;
    std::uint64_t seed_;
    MockConfig config_;
};

// Response texts from a capture log, in recorded order.
inline std::vector<std::string> load_capture_transcript(const std::filesystem::path& path) {
    std::vector<std::string> responses;
    std::istringstream in(util::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        responses.push_back(j.at("response").at("text").get<std::string>());
    }
    return responses;
}

// Replays a fixed transcript; throws a transport-class error once exhausted.
class ScriptedProvider : public ChatProvider {
public:
    explicit ScriptedProvider(std::vector<std::string> responses) : responses_(std::move(responses)) {}

    ChatResponse complete(const ChatRequest& request) override {
        request.validate();
        std::lock_guard lock(mu_);
        if (next_ >= responses_.size()) throw TransportError("scripted transcript exhausted");
        ChatResponse out;
        out.text = responses_[next_++];
        return out;
    }

    std::string name() const override { return "scripted"; }

    std::size_t remaining() const {
        std::lock_guard lock(mu_);
        return responses_.size() - next_;
    }

private:
    mutable std::mutex mu_;
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Concurrency helpers
// ---------------------------------------------------------------------------

// In-flight request bound shared by all fan-out call sites.
class Semaphore {
public:
    explicit Semaphore(int permits) : permits_(permits) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return permits_ > 0; });
        --permits_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++permits_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int permits_;
};

struct SemaphoreGuard {
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    Semaphore& sem;
};

// Caps concurrent completions across every fan-out call site sharing the
// same gate.
class BoundedProvider : public ChatProvider {
public:
    BoundedProvider(std::shared_ptr<ChatProvider> inner, std::shared_ptr<Semaphore> gate)
        : inner_(std::move(inner)), gate_(std::move(gate)) {}

    ChatResponse complete(const ChatRequest& request) override {
        SemaphoreGuard guard(*gate_);
        return inner_->complete(request);
    }

    std::string name() const override { return inner_->name() + "+bounded"; }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<Semaphore> gate_;
};

// Runs fn(i) for i in [0, n); results must be written into index-addressed
// slots by the caller so ordering stays deterministic. The first exception is
// rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, int parallelism, Fn&& fn) {
    if (n == 0) return;
    if (parallelism <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(parallelism), n));
    threads.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace sandman::llm
