#pragma once

#include <map>
#include <string>
#include <string_view>

namespace gazeguide::prompts {

// Templates are stored byte-for-byte, trailing spaces included.
extern const std::string_view kEyeTrackingAnalysis;   // {paragraph_content}, {eye_tracking_wordlist}
extern const std::string_view kTextOnlyAnalysis;      // {paragraph}
extern const std::string_view kRealtimeIntervention;  // as kEyeTrackingAnalysis plus a JSON contract
extern const std::string_view kAssistant;             // {paragraph}, {analysis_results}

/// Substitutes each {name} in `vars`. Every variable must occur in the
/// template; other braces are left alone. Throws ValidationError.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars);

} // namespace gazeguide::prompts
