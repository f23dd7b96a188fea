const input = document.getElementById('input');
const addBtn = document.getElementById('addBtn');
const todoList = document.getElementById('todoList');

addBtn.addEventListener('click', () => {
  const text = input.value.trim();
  if (!text) return;
  const item = document.createElement('div');
  item.className = 'todoItem';
  const content = document.createElement('span');
  content.className = 'itemContent';
  content.textContent = text;
  const del = document.createElement('button');
  del.className = 'deleteBtn';
  del.textContent = 'Delete';
  del.addEventListener('click', () => item.remove());
  item.appendChild(content);
  item.appendChild(del);
  todoList.appendChild(item);
  input.value = '';
});
