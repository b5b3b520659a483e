#pragma once

#include <optional>
#include <string>
#include <vector>

namespace adret {

/// Behavioral contract every reasoning backend satisfies. `next_step` is
/// deterministic given (context, backend seed); a finished chain exposes its
/// final answer through the `ANSWER:` marker in the last step.
class ReasoningBackend {
public:
    struct Step {
        std::string text;
        bool done = false;
    };

    virtual ~ReasoningBackend() = default;

    virtual Step next_step(const std::string& context) = 0;

    /// k alternative continuations for the current context, or an empty
    /// vector when sampling is unsupported.
    virtual std::vector<std::string> sample_continuations(const std::string& context, int k) = 0;

    /// Reply to a confidence probe, or nullopt when probing is unsupported.
    virtual std::optional<std::string> probe_confidence(const std::string& context) = 0;
};

inline constexpr const char* kAnswerMarker = "ANSWER:";

/// Extract the final answer from a step containing the ANSWER: marker.
/// Returns the trimmed text after the marker with any trailing sentence
/// punctuation removed; nullopt when the marker is absent.
std::optional<std::string> extract_answer(const std::string& step_text);

}  // namespace adret
