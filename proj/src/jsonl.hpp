#pragma once

#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace ptg::detail {

/// Calls fn(record, line_no) for every nonblank line; wraps failures with the
/// line number.
template <typename Fn>
void for_each_jsonl(std::string_view text, std::string_view what, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            fn(nlohmann::json::parse(line), line_no);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(what) + " line " + std::to_string(line_no) + ": " +
                                      e.what());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::parse_error, std::string(what) + " line " +
                                                    std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace ptg::detail
