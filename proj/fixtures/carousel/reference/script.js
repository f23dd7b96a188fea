const images = [
  { url: 'images/mountain.jpg', alt: 'Mountain', id: 'img1', description: 'A mountain at dawn' },
  { url: 'images/lake.jpg', alt: 'Lake', id: 'img2', description: 'A quiet lake' },
  { url: 'images/forest.jpg', alt: 'Forest', id: 'img3', description: 'A pine forest' },
  { url: 'images/desert.jpg', alt: 'Desert', id: 'img4', description: 'Dunes at noon' }
];

const thumbnails = document.getElementById('thumbnails');
const featured = document.getElementById('featured');
const description = document.getElementById('current_description');

images.forEach((image) => {
  const img = document.createElement('img');
  img.src = image.url;
  img.alt = image.alt;
  img.id = image.id;
  img.addEventListener('click', () => {
    featured.src = image.url;
    featured.alt = image.alt;
    description.textContent = image.description;
    document.querySelectorAll('#thumbnails img').forEach((t) => t.classList.remove('highlighted'));
    img.classList.add('highlighted');
  });
  thumbnails.appendChild(img);
});
