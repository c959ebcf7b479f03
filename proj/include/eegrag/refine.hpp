#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace eegrag {

// Instruction given to the language model ahead of the retrieved sentences.
extern const char* kDefaultPromptTemplate;

struct RefineRequest {
    std::vector<std::string> retrieved; // k candidate sentences, top-1 first
    std::string prompt_template = kDefaultPromptTemplate;
};

struct RefineResult {
    std::string output_sentence;
    std::string client_name;
    double latency_ms = 0.0;
};

class RefineClient {
public:
    virtual ~RefineClient() = default;
    virtual std::string name() const = 0;
    virtual RefineResult refine(const RefineRequest& request) = 0;
};

// Thrown when a client response cannot be reduced to one clean sentence.
struct MalformedOutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void validate_request(const RefineRequest& request);
std::string build_prompt(const RefineRequest& request);
// Strips prompt echoes, leading labels and wrapping quotes, and keeps the
// first sentence of the reply. Throws MalformedOutputError if nothing
// usable remains.
std::string postprocess_response(const std::string& raw, const std::string& prompt);

// Deterministic fallback: emits the top-1 retrieved sentence verbatim, so
// end-to-end scores measure retrieval quality with zero generation noise.
class OfflineRefiner : public RefineClient {
public:
    std::string name() const override { return "offline-top1"; }
    RefineResult refine(const RefineRequest& request) override;
};

// Base for clients that actually generate text: shared retry loop and
// response post-processing around a raw generate() call.
class GenerativeClient : public RefineClient {
public:
    explicit GenerativeClient(std::size_t max_retries = 2) : max_retries_(max_retries) {}
    RefineResult refine(const RefineRequest& request) override;

protected:
    virtual std::string generate(const std::string& prompt) = 0;

private:
    std::size_t max_retries_;
};

// HTTP client for a hosted model. POSTs {"model", "prompt", "temperature",
// "max_tokens"} to <endpoint>/generate; the endpoint is health-checked at
// construction (GET /health).
class ExternalHttpClient : public GenerativeClient {
public:
    ExternalHttpClient(std::string model, std::string endpoint, double temperature,
                       std::size_t max_tokens, std::size_t max_retries);
    std::string name() const override { return model_; }

protected:
    std::string generate(const std::string& prompt) override;

private:
    std::string model_;
    std::string endpoint_;
    double temperature_;
    std::size_t max_tokens_;
};

// Pipes the prompt through a local command (prompt on stdin, reply on stdout).
class SubprocessClient : public GenerativeClient {
public:
    explicit SubprocessClient(std::string command, std::size_t max_retries);
    std::string name() const override { return "subprocess:" + command_; }

protected:
    std::string generate(const std::string& prompt) override;

private:
    std::string command_;
};

// Serves recorded responses from a transcript, keyed by prompt. Lets a run
// against a hosted model be re-evaluated offline.
class ReplayClient : public GenerativeClient {
public:
    explicit ReplayClient(const std::string& transcript_path);
    std::string name() const override { return "replay"; }

protected:
    std::string generate(const std::string& prompt) override;

private:
    std::map<std::string, std::string> responses_;
};

// Wraps any client and appends {prompt, output, client, latency_ms} JSONL
// records to a transcript file.
class RecordingClient : public RefineClient {
public:
    RecordingClient(std::shared_ptr<RefineClient> inner, std::string transcript_path);
    std::string name() const override { return inner_->name(); }
    RefineResult refine(const RefineRequest& request) override;

private:
    std::shared_ptr<RefineClient> inner_;
    std::string transcript_path_;
    std::mutex write_mutex_;
};

// Config: {"kind": "offline"|"external_http"|"subprocess"|"replay",
//          "model", "endpoint", "command", "transcript", "record_to",
//          "temperature", "max_tokens", "max_retries"}
std::shared_ptr<RefineClient> make_client(const nlohmann::json& config);

} // namespace eegrag
