#ifndef BCHAR_ERRORS_HPP
#define BCHAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bchar {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bchar

#endif
