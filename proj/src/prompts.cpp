#include "gazeguide/prompts.hpp"

#include "gazeguide/errors.hpp"

namespace gazeguide::prompts {

const std::string_view kEyeTrackingAnalysis = R"PROMPT(The user is about to engage in a conversation with a helpful, 
personalized chatbot after reading the paragraph:

{paragraph_content}

The user was also looking at the following content with timestamps:
{eye_tracking_wordlist}

# Eye tracking: Were there fixations (words in the same sentence 
looked at repeatedly across seconds)? Regressions (returning to 
previous sentences)? Staring away after a concept? Skipping any 
content (sentences in the paragraph not present in the wordlist)? 
If no significant ones, state so.

# Need help (if any): Based on the most pressing findings, list any 
struggles where the user significantly showed a reaction that might 
require help.

Instructions: Use quantitative observations whenever possible 
(seconds of fixations, regressions, etc.) and align observations 
with the content it was a reaction to.)PROMPT";

const std::string_view kTextOnlyAnalysis = R"PROMPT(The user is about to engage in a conversation with a helpful, 
personalized chatbot after reading the paragraph.

{paragraph}

# Analysis: What is the user most likely to have struggled with?
# Need help (if any): Based on your analysis.)PROMPT";

const std::string_view kRealtimeIntervention = R"PROMPT(The user is about to engage in a conversation with a helpful, 
personalized chatbot after reading the paragraph:

{paragraph_content}

The user was also looking at the following content with timestamps:
{eye_tracking_wordlist}

# Eye tracking: Were there fixations (words in the same sentence 
looked at repeatedly across seconds)? Regressions (returning to 
previous sentences)? Staring away after a concept? Skipping any 
content (sentences in the paragraph not present in the wordlist)? 
If no significant ones, state so.

# Need help (if any): Based on the most pressing findings, list any 
struggles where the user significantly showed a reaction that might 
require help.

Instructions: Use quantitative observations whenever possible 
(seconds of fixations, regressions, etc.) and align observations 
with the content it was a reaction to.

Describe any changes, when they occurred, and what intervention 
(if any) might be needed.

Return the output in JSON with the following fields:
- observations: [...],
- need_help: [...],
- intervention: "Brief opening message the assistant should say 
  if an intervention is needed, otherwise 'none'.")PROMPT";

const std::string_view kAssistant = R"PROMPT(You are a voice assistant that helps people overcome struggles 
when reading paragraphs.

The user just read the following paragraph:
{paragraph}

Below is an analysis of their reading behavior and attention patterns:
{analysis_results}

YOUR INSTRUCTIONS:
- Have a natural, dialogic conversation that helps the user reflect 
  on key ideas and clarify any confusion.
- Tone: Open-ended, Socratic, concise (<20s per turn).
- Be transparent: hedge your inferences ("might", "seems").
- Use the analysis as subtle guidance, starting with what they most 
  likely struggled with. Confirm with the user before moving on.)PROMPT";

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out(tmpl);
    for (const auto& [name, value] : vars) {
        const auto key = "{" + name + "}";
        auto pos = out.find(key);
        if (pos == std::string::npos) throw ValidationError("template has no placeholder " + key);
        while (pos != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos = out.find(key, pos + value.size());
        }
    }
    return out;
}

} // namespace gazeguide::prompts
