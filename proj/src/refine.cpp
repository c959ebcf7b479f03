#include "eegrag/refine.hpp"

#include <array>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <unistd.h>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

using nlohmann::json;

namespace eegrag {

const char* kDefaultPromptTemplate =
        "You are given three similar sentences. Your task is to generate one single, fluent, "
        "grammatically correct sentence that captures the same meaning, without adding or "
        "removing information. Only output the corrected sentence.";

void validate_request(const RefineRequest& request) {
    if (request.retrieved.empty()) {
        throw std::invalid_argument("refine: empty retrieved-sentence list");
    }
    for (const auto& s : request.retrieved) {
        if (s.empty()) throw std::invalid_argument("refine: retrieved sentence is empty");
    }
    if (request.prompt_template.empty()) {
        throw std::invalid_argument("refine: empty prompt template");
    }
}

std::string build_prompt(const RefineRequest& request) {
    std::string prompt = request.prompt_template;
    prompt += "\n\n";
    for (std::size_t i = 0; i < request.retrieved.size(); ++i) {
        prompt += std::to_string(i + 1) + ". " + request.retrieved[i] + "\n";
    }
    return prompt;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

const char* kLabels[] = {"output:", "answer:", "corrected sentence:", "sentence:", "response:"};

} // namespace

std::string postprocess_response(const std::string& raw, const std::string& prompt) {
    std::string text = raw;

    // drop a prompt echo, keeping whatever follows it
    const std::string trimmed_prompt = trim(prompt);
    if (!trimmed_prompt.empty()) {
        const auto pos = text.find(trimmed_prompt);
        if (pos != std::string::npos) text = text.substr(pos + trimmed_prompt.size());
    }
    text = trim(text);

    // first non-empty line
    std::string line;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        line = trim(text.substr(start, nl - start));
        if (!line.empty()) break;
        start = nl + 1;
    }
    if (line.empty()) throw MalformedOutputError("empty response");
    text = line;

    // leading labels like "Output:" are generation artifacts, not content
    bool stripped = true;
    while (stripped) {
        stripped = false;
        const std::string low = lower(text);
        for (const char* label : kLabels) {
            if (low.rfind(label, 0) == 0) {
                text = trim(text.substr(std::string(label).size()));
                stripped = true;
                break;
            }
        }
    }
    if ((text.size() >= 2) &&
        ((text.front() == '"' && text.back() == '"') ||
         (text.front() == '\'' && text.back() == '\''))) {
        text = trim(text.substr(1, text.size() - 2));
    }

    // keep one sentence
    const auto stop = text.find_first_of(".!?");
    if (stop != std::string::npos) text = trim(text.substr(0, stop + 1));

    if (text.empty()) throw MalformedOutputError("response reduced to nothing");
    return text;
}

RefineResult OfflineRefiner::refine(const RefineRequest& request) {
    validate_request(request);
    RefineResult result;
    result.output_sentence = trim(request.retrieved.front());
    result.client_name = name();
    result.latency_ms = 0.0;
    return result;
}

RefineResult GenerativeClient::refine(const RefineRequest& request) {
    validate_request(request);
    const std::string prompt = build_prompt(request);

    const auto begin = std::chrono::steady_clock::now();
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= max_retries_; ++attempt) {
        const std::string raw = generate(prompt);
        try {
            RefineResult result;
            result.output_sentence = postprocess_response(raw, prompt);
            result.client_name = name();
            result.latency_ms = std::chrono::duration<double, std::milli>(
                                        std::chrono::steady_clock::now() - begin)
                                        .count();
            return result;
        } catch (const MalformedOutputError& e) {
            last_error = e.what();
        }
    }
    throw std::runtime_error("refine client '" + name() + "': malformed output after " +
                             std::to_string(max_retries_ + 1) + " attempts (" + last_error + ")");
}

ExternalHttpClient::ExternalHttpClient(std::string model, std::string endpoint,
                                       double temperature, std::size_t max_tokens,
                                       std::size_t max_retries)
    : GenerativeClient(max_retries),
      model_(std::move(model)),
      endpoint_(std::move(endpoint)),
      temperature_(temperature),
      max_tokens_(max_tokens) {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(5, 0);
    auto res = client.Get("/health");
    if (!res || res->status != 200) {
        throw std::runtime_error("refine client health check failed for endpoint " + endpoint_);
    }
}

std::string ExternalHttpClient::generate(const std::string& prompt) {
    httplib::Client client(endpoint_);
    client.set_read_timeout(120, 0);
    const json body = {{"model", model_},
                       {"prompt", prompt},
                       {"temperature", temperature_},
                       {"max_tokens", max_tokens_}};
    auto res = client.Post("/generate", body.dump(), "application/json");
    if (!res) throw std::runtime_error("refine client '" + model_ + "': request timed out");
    if (res->status != 200) {
        throw std::runtime_error("refine client '" + model_ + "': HTTP " +
                                 std::to_string(res->status));
    }
    return json::parse(res->body).at("text").get<std::string>();
}

SubprocessClient::SubprocessClient(std::string command, std::size_t max_retries)
    : GenerativeClient(max_retries), command_(std::move(command)) {
    if (command_.empty()) throw std::invalid_argument("subprocess client: empty command");
}

std::string SubprocessClient::generate(const std::string& prompt) {
    // single-shot exchange: prompt via a temp file on stdin, reply on stdout
    const std::string tmp = "/tmp/eegrag-prompt-" + std::to_string(::getpid()) + ".txt";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("subprocess client: cannot write prompt file");
        out << prompt;
    }
    const std::string cmd = command_ + " < " + tmp;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("subprocess client: failed to launch '" + command_ + "'");
    std::string output;
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
    const int rc = ::pclose(pipe);
    std::remove(tmp.c_str());
    if (rc != 0) {
        throw std::runtime_error("subprocess client: '" + command_ + "' exited with status " +
                                 std::to_string(rc));
    }
    return output;
}

ReplayClient::ReplayClient(const std::string& transcript_path) : GenerativeClient(0) {
    std::ifstream in(transcript_path);
    if (!in) throw std::runtime_error("cannot open transcript '" + transcript_path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const json entry = json::parse(line);
        responses_[entry.at("prompt").get<std::string>()] =
                entry.at("response").get<std::string>();
    }
}

std::string ReplayClient::generate(const std::string& prompt) {
    auto it = responses_.find(prompt);
    if (it == responses_.end()) {
        throw std::runtime_error("replay transcript has no response for this prompt");
    }
    return it->second;
}

RecordingClient::RecordingClient(std::shared_ptr<RefineClient> inner, std::string transcript_path)
    : inner_(std::move(inner)), transcript_path_(std::move(transcript_path)) {}

RefineResult RecordingClient::refine(const RefineRequest& request) {
    const RefineResult result = inner_->refine(request);
    const json entry = {{"prompt", build_prompt(request)},
                        {"response", result.output_sentence},
                        {"client", result.client_name},
                        {"latency_ms", result.latency_ms}};
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::ofstream out(transcript_path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to transcript '" + transcript_path_ + "'");
    out << entry.dump() << "\n";
    return result;
}

std::shared_ptr<RefineClient> make_client(const json& config) {
    const std::string kind = config.value("kind", "offline");
    std::shared_ptr<RefineClient> client;
    if (kind == "offline") {
        client = std::make_shared<OfflineRefiner>();
    } else if (kind == "external_http") {
        client = std::make_shared<ExternalHttpClient>(
                config.value("model", "meta-llama/Meta-Llama-3-8B"),
                config.at("endpoint").get<std::string>(), config.value("temperature", 0.0),
                config.value("max_tokens", std::size_t{128}),
                config.value("max_retries", std::size_t{2}));
    } else if (kind == "subprocess") {
        client = std::make_shared<SubprocessClient>(config.at("command").get<std::string>(),
                                                    config.value("max_retries", std::size_t{2}));
    } else if (kind == "replay") {
        client = std::make_shared<ReplayClient>(config.at("transcript").get<std::string>());
    } else {
        throw std::invalid_argument("unknown refine client kind '" + kind + "'");
    }
    if (config.contains("record_to")) {
        client = std::make_shared<RecordingClient>(client,
                                                   config.at("record_to").get<std::string>());
    }
    return client;
}

} // namespace eegrag
