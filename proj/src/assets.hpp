#pragma once

#include <string_view>

// Generated at configure time from assets/ (see src/CMakeLists.txt).
namespace ifkit::assets {

extern const std::string_view template_cot;
extern const std::string_view template_few_shot;
extern const std::string_view template_self_reflection;
extern const std::string_view template_selective_gate;
extern const std::string_view template_span_extraction;
extern const std::string_view template_judge;
extern const std::string_view fewshot_ifeval;
extern const std::string_view fewshot_complexbench;

}  // namespace ifkit::assets
