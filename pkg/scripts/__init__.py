# Командная строка fede