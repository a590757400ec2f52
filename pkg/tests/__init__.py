"""Тесты проекта satmvs-rpc."""
