"""UI module initialization."""

from ui.components import (
    initialize_session,
    render_answers,
    append_answer,
    reset_answers,
    render_sidebar,
    graph_uploader,
    question_params,
    show_status,
)

from ui.chat_interface import QuestionController

__all__ = [
    "initialize_session",
    "render_answers",
    "append_answer",
    "reset_answers",
    "render_sidebar",
    "graph_uploader",
    "question_params",
    "show_status",
    "QuestionController",
]
